#pragma once

// Named registry of the vector fields, sections and jump maps exercised by
// the verification suites. The declarative side (dimensions, default
// parameters, expected values) lives in data/flow_corpus.json; this header
// supplies the executable callbacks for each corpus name.

#include "conadj/hybrid.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace conadj::corpus {

/// f = a x (scalar): closed-form flow e^{aT} x0.
inline VectorField linear_scalar() {
  VectorField vf;
  vf.n = 1;
  vf.q = 1;
  vf.f = [](const Vec& x, const Vec& p) { return Vec(p[0] * x); };
  vf.fx = [](const Vec&, const Vec& p) { return Mat(Mat::Constant(1, 1, p[0])); };
  vf.fp = [](const Vec& x, const Vec&) { return Mat(x); };
  return vf;
}

/// Planar rotation x' = (y, -x): parameter-free dynamics (q = 1, unused).
inline VectorField rotation_param_free() {
  VectorField vf;
  vf.n = 2;
  vf.q = 1;
  vf.f = [](const Vec& x, const Vec&) { return Vec(Vec2(x[1], -x[0])); };
  vf.fx = [](const Vec&, const Vec&) {
    Mat2 J;
    J << 0, 1, -1, 0;
    return Mat(J);
  };
  vf.fp = [](const Vec&, const Vec&) { return Mat(Mat::Zero(2, 1)); };
  return vf;
}

/// Hopf normal form in Cartesian coordinates, p = (omega, gr):
///   x' = gr x (1 - x^2 - y^2) - omega y
///   y' = gr y (1 - x^2 - y^2) + omega x
/// The unit circle is a limit cycle of period 2 pi / omega for gr > 0; the
/// period does not depend on gr and the isochrons are radial (no shear).
inline VectorField hopf() {
  VectorField vf;
  vf.n = 2;
  vf.q = 2;
  vf.f = [](const Vec& x, const Vec& p) {
    const double s = 1.0 - x.squaredNorm();
    return Vec(Vec2(p[1] * x[0] * s - p[0] * x[1], p[1] * x[1] * s + p[0] * x[0]));
  };
  vf.fx = [](const Vec& x, const Vec& p) {
    const double s = 1.0 - x.squaredNorm();
    Mat2 J;
    J << p[1] * (s - 2 * x[0] * x[0]), -p[0] - 2 * p[1] * x[0] * x[1],
        p[0] - 2 * p[1] * x[0] * x[1], p[1] * (s - 2 * x[1] * x[1]);
    return Mat(J);
  };
  vf.fp = [](const Vec& x, const Vec&) {
    const double s = 1.0 - x.squaredNorm();
    Mat J(2, 2);
    J << -x[1], x[0] * s, x[0], x[1] * s;
    return J;
  };
  return vf;
}

/// Section y = 0 (parameter-free).
inline Section section_y() {
  Section sec;
  sec.h = [](const Vec& x, const Vec&) { return x[1]; };
  sec.hx = [](const Vec&, const Vec&) { return RowVec(RowVec::Unit(2, 1)); };
  sec.hp = [](const Vec&, const Vec& p) { return RowVec(RowVec::Zero(p.size())); };
  return sec;
}

/// Impacting ball, p = (gamma, r): position x1, velocity x2, constant
/// gravity, floor at x1 = 0 with restitution r.
inline VectorField ball_field() {
  VectorField vf;
  vf.n = 2;
  vf.q = 2;
  vf.f = [](const Vec& x, const Vec& p) { return Vec(Vec2(x[1], -p[0])); };
  vf.fx = [](const Vec&, const Vec&) {
    Mat2 J;
    J << 0, 1, 0, 0;
    return Mat(J);
  };
  vf.fp = [](const Vec&, const Vec&) {
    Mat J(2, 2);
    J << 0, 0, -1, 0;
    return J;
  };
  return vf;
}

inline Section floor_section() {
  Section sec;
  sec.h = [](const Vec& x, const Vec&) { return x[0]; };
  sec.hx = [](const Vec&, const Vec&) { return RowVec(RowVec::Unit(2, 0)); };
  sec.hp = [](const Vec&, const Vec& p) { return RowVec(RowVec::Zero(p.size())); };
  return sec;
}

/// Velocity reversal with restitution p[1]: g = (x1, -r x2).
inline JumpMap restitution_jump() {
  JumpMap jm;
  jm.g = [](const Vec& x, const Vec& p) { return Vec(Vec2(x[0], -p[1] * x[1])); };
  jm.gx = [](const Vec&, const Vec& p) {
    Mat2 J;
    J << 1, 0, 0, -p[1];
    return Mat(J);
  };
  jm.gp = [](const Vec& x, const Vec&) {
    Mat J(2, 2);
    J << 0, 0, 0, -x[1];
    return J;
  };
  return jm;
}

/// Unstable spiral with a wall, p = (zeta, r):
///   x1' = x2, x2' = -x1 + 2 zeta x2
/// wall at x1 = 1 with the restitution jump; for moderate zeta and r the
/// system has an attracting hybrid limit cycle.
inline VectorField spiral_field() {
  VectorField vf;
  vf.n = 2;
  vf.q = 2;
  vf.f = [](const Vec& x, const Vec& p) {
    return Vec(Vec2(x[1], -x[0] + 2 * p[0] * x[1]));
  };
  vf.fx = [](const Vec&, const Vec& p) {
    Mat2 J;
    J << 0, 1, -1, 2 * p[0];
    return Mat(J);
  };
  vf.fp = [](const Vec& x, const Vec&) {
    Mat J(2, 2);
    J << 0, 0, 2 * x[1], 0;
    return J;
  };
  return vf;
}

inline Section wall_section() {
  Section sec;
  sec.h = [](const Vec& x, const Vec&) { return x[0] - 1.0; };
  sec.hx = [](const Vec&, const Vec&) { return RowVec(RowVec::Unit(2, 0)); };
  sec.hp = [](const Vec&, const Vec& p) { return RowVec(RowVec::Zero(p.size())); };
  return sec;
}

/// The attracting impact cycle of the spiral-with-wall system: anchor point
/// xB (velocity zero crossing away from the wall), post-jump point xA, wall
/// hit x_hit, time t1 from xA to xB and full period T_full.
struct SpiralCycle {
  VectorField vf;
  Vec p;
  Vec xA, xB, x_hit;
  double t1 = 0.0, T_full = 0.0;
};

inline SpiralCycle spiral_cycle(const Vec& p) {
  SpiralCycle sc;
  sc.vf = spiral_field();
  sc.p = p;
  Section wall = wall_section();
  Section anchor;
  anchor.h = [](const Vec& x, const Vec&) { return x[1]; };
  anchor.hx = [](const Vec&, const Vec&) { return RowVec(RowVec::Unit(2, 1)); };
  anchor.hp = [](const Vec&, const Vec& pp) { return RowVec(RowVec::Zero(pp.size())); };

  // attracting fixed point of the post-jump velocity return map
  auto wall_hit = [&](double v) {
    Vec x0(2);
    x0 << 1.0, -v;
    return flow_to_event(sc.vf, x0, p, wall, 30.0, 0.005, 0.0);
  };
  double v = 0.5;
  for (int k = 0; k < 200; ++k) v = p[1] * wall_hit(v).first[1];

  auto [x_hit, T_full] = wall_hit(v);
  sc.x_hit = x_hit;
  sc.T_full = T_full;
  sc.xA = Vec(2);
  sc.xA << 1.0, -v;
  auto [xB, t1] = flow_to_event(sc.vf, sc.xA, p, anchor, 30.0, 0.005, 1e-3);
  sc.xB = xB;
  sc.t1 = t1;
  return sc;
}

inline HybridMonodromy spiral_monodromy(const SpiralCycle& sc) {
  Segment seg1{sc.vf, sc.xB, sc.T_full - sc.t1, sc.p, 4000};
  Segment seg2{sc.vf, sc.xA, sc.t1, sc.p, 4000};
  HybridJunction j{sc.vf, sc.vf, restitution_jump(), wall_section(), sc.x_hit, sc.p};
  return hybrid_monodromy(seg1, j, seg2);
}

inline VectorField field_by_name(const std::string& name) {
  if (name == "linear_scalar") return linear_scalar();
  if (name == "rotation_param_free") return rotation_param_free();
  if (name == "hopf") return hopf();
  if (name == "ball") return ball_field();
  if (name == "spiral_wall") return spiral_field();
  throw IoError("unknown corpus field '" + name + "'");
}

struct CorpusEntry {
  std::string name;
  int n = 0, q = 0;
  Vec x0, p;
  double T = 1.0;
  int n_steps = 1000;
  nlohmann::json expected;
};

inline std::vector<CorpusEntry> load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open corpus file " + path);
  nlohmann::json j = nlohmann::json::parse(is);
  std::vector<CorpusEntry> out;
  for (const auto& e : j) {
    CorpusEntry c;
    c.name = e.at("name").get<std::string>();
    c.n = e.at("n").get<int>();
    c.q = e.at("q").get<int>();
    auto x0 = e.at("x0").get<std::vector<double>>();
    auto p = e.at("p").get<std::vector<double>>();
    c.x0 = Eigen::Map<const Vec>(x0.data(), static_cast<Eigen::Index>(x0.size()));
    c.p = Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size()));
    c.T = e.at("T").get<double>();
    c.n_steps = e.value("n_steps", 1000);
    c.expected = e.value("expected", nlohmann::json::object());
    out.push_back(std::move(c));
  }
  return out;
}

inline Segment make_segment(const CorpusEntry& c) {
  Segment seg;
  seg.field = field_by_name(c.name);
  if (seg.field.n != c.n || seg.field.q != c.q)
    throw IoError("corpus dimensions for '" + c.name + "' do not match the registry");
  seg.x0 = c.x0;
  seg.p = c.p;
  seg.T = c.T;
  seg.n_steps = c.n_steps;
  return seg;
}

inline std::string default_corpus_path() {
#ifdef CONADJ_SOURCE_DIR
  return std::string(CONADJ_SOURCE_DIR) + "/data/flow_corpus.json";
#else
  return "data/flow_corpus.json";
#endif
}

}  // namespace conadj::corpus
