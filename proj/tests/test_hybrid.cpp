#include "conadj/corpus.hpp"
#include "conadj/numdiff.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace conadj;

namespace {

/// Composed zero-time discontinuity map: flow with f1 until the event
/// surface, apply the jump, then flow backward with f2 by the same amount.
/// For x on the surface the composition reduces to the jump itself; its
/// linearization is the saltation matrix.
Vec composed_map(const VectorField& f1, const VectorField& f2, const JumpMap& g,
                 const Section& sec, const Vec& x, const Vec& p) {
  const int sub = 64;
  auto hval = [&](double s) { return sec.h(flow_fixed(f1, x, p, s, sub), p); };
  double lo = -0.05, hi = 0.05;
  double flo = hval(lo);
  REQUIRE((flo > 0) != (hval(hi) > 0));
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((hval(mid) > 0) == (flo > 0)) {
      lo = mid;
      flo = hval(mid);
    } else {
      hi = mid;
    }
  }
  const double s = 0.5 * (lo + hi);
  const Vec xe = flow_fixed(f1, x, p, s, sub);
  const Vec xj = g.g(xe, p);
  return flow_fixed(f2, xj, p, -s, sub);
}

}  // namespace

TEST_CASE("identity jump with matching fields has trivial saltation") {
  auto fields = corpus::ball_field();
  JumpMap id;
  id.g = [](const Vec& x, const Vec&) { return x; };
  id.gx = [](const Vec& x, const Vec&) { return Mat(Mat::Identity(x.size(), x.size())); };
  id.gp = [](const Vec& x, const Vec& p) { return Mat(Mat::Zero(x.size(), p.size())); };

  HybridJunction j;
  j.f1 = fields;
  j.f2 = fields;
  j.g = id;
  j.h_es = corpus::floor_section();
  j.x0 = Vec2(0.0, -3.0);
  j.p0 = Vec2(9.81, 0.7);

  Saltation sal = saltation(j);
  CHECK(sal.lam_es.norm() == 0.0);
  CHECK((sal.dxD - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sal.dpD.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("saltation matrix matches finite differences of the composed map") {
  auto e = [] {
    for (const auto& c : corpus::load_corpus(corpus::default_corpus_path()))
      if (c.name == "ball") return c;
    throw std::runtime_error("ball entry missing");
  }();

  HybridJunction j;
  j.f1 = corpus::ball_field();
  j.f2 = corpus::ball_field();
  j.g = corpus::restitution_jump();
  j.h_es = corpus::floor_section();
  j.x0 = e.x0;
  j.p0 = e.p;
  Saltation sal = saltation(j);

  const double del = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Vec xp = j.x0, xm = j.x0;
    xp[i] += del;
    xm[i] -= del;
    const Vec dcol = (composed_map(j.f1, j.f2, j.g, j.h_es, xp, j.p0) -
                      composed_map(j.f1, j.f2, j.g, j.h_es, xm, j.p0)) /
                     (2 * del);
    INFO("state column " << i);
    CHECK((sal.dxD.col(i) - dcol).norm() <= 1e-6 * std::max(1.0, dcol.norm()));
  }
  for (int i = 0; i < 2; ++i) {
    Vec pp = j.p0, pm = j.p0;
    pp[i] += del;
    pm[i] -= del;
    const Vec dcol = (composed_map(j.f1, j.f2, j.g, j.h_es, j.x0, pp) -
                      composed_map(j.f1, j.f2, j.g, j.h_es, j.x0, pm)) /
                     (2 * del);
    INFO("parameter column " << i);
    CHECK((sal.dpD.col(i) - dcol).norm() <= 1e-6 * std::max(1.0, dcol.norm()));
  }
}

TEST_CASE("parameter-free jump and field give zero parameter saltation") {
  VectorField vf = corpus::ball_field();
  JumpMap jm;
  jm.g = [](const Vec& x, const Vec&) { return Vec(Vec2(x[0], -0.5 * x[1])); };
  jm.gx = [](const Vec&, const Vec&) {
    Mat2 J;
    J << 1, 0, 0, -0.5;
    return Mat(J);
  };
  jm.gp = [](const Vec&, const Vec& p) { return Mat(Mat::Zero(2, p.size())); };

  HybridJunction j{vf, vf, jm, corpus::floor_section(), Vec2(0.0, -3.0), Vec2(9.81, 0.0)};
  Saltation sal = saltation(j);
  // hp = 0, gp = 0: the parameter block vanishes identically
  CHECK(sal.dpD.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("smooth limit: hybrid monodromy equals the plain monodromy") {
  // split the circular limit cycle at an interior point and insert an
  // identity junction whose surface is transversal there
  auto e = [] {
    for (const auto& c : corpus::load_corpus(corpus::default_corpus_path()))
      if (c.name == "hopf") return c;
    throw std::runtime_error("hopf entry missing");
  }();
  VectorField vf = corpus::hopf();

  Segment full = corpus::make_segment(e);
  full.n_steps = 4000;
  SegmentSensitivity whole = segment_sensitivities(full);

  const double split = 0.4;
  Segment seg1 = full;
  seg1.T = split * full.T;
  seg1.n_steps = 1600;
  SegmentSensitivity s1 = segment_sensitivities(seg1);
  const Vec x_mid = s1.x1;

  Segment seg2 = full;
  seg2.x0 = x_mid;
  seg2.T = (1.0 - split) * full.T;
  seg2.n_steps = 2400;

  const Vec that = vf.f(x_mid, full.p).normalized();
  Section sec;
  sec.h = [x_mid, that](const Vec& x, const Vec&) { return that.dot(x - x_mid); };
  sec.hx = [that](const Vec&, const Vec&) { return RowVec(that.transpose()); };
  sec.hp = [](const Vec&, const Vec& p) { return RowVec(RowVec::Zero(p.size())); };

  JumpMap id;
  id.g = [](const Vec& x, const Vec&) { return x; };
  id.gx = [](const Vec& x, const Vec&) { return Mat(Mat::Identity(x.size(), x.size())); };
  id.gp = [](const Vec& x, const Vec& p) { return Mat(Mat::Zero(x.size(), p.size())); };

  HybridJunction j{vf, vf, id, sec, x_mid, full.p};
  HybridMonodromy m = hybrid_monodromy(seg1, j, seg2);

  CHECK((m.G_x - whole.X1).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((m.G_p - whole.P1).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("spiral-wall limit cycle: period sensitivities match measurements") {
  VectorField vf = corpus::spiral_field();
  Section wall = corpus::wall_section();
  Section anchor;  // velocity zero crossing on the far side of the orbit
  anchor.h = [](const Vec& x, const Vec&) { return x[1]; };
  anchor.hx = [](const Vec&, const Vec&) { return RowVec(RowVec::Unit(2, 1)); };
  anchor.hp = [](const Vec&, const Vec& p) { return RowVec(RowVec::Zero(p.size())); };

  Vec p(2);
  p << 0.1, 0.4;  // (zeta, restitution)

  // from the post-jump state (1, -v) to the next wall hit
  auto wall_hit = [&](double v, const Vec& pp) {
    Vec x0(2);
    x0 << 1.0, -v;
    return flow_to_event(vf, x0, pp, wall, 30.0, 0.005, 0.0);
  };
  // attracting fixed point of the post-jump velocity return map
  auto settle = [&](const Vec& pp) {
    double v = 0.5;
    for (int k = 0; k < 200; ++k) v = pp[1] * wall_hit(v, pp).first[1];
    return v;
  };
  const double v_star = settle(p);
  auto [x_hit, T_full] = wall_hit(v_star, p);
  REQUIRE(p[1] * x_hit[1] == Catch::Approx(v_star).margin(1e-10));
  REQUIRE(x_hit[1] > 0.1);  // transversal wall hit

  // anchor the monodromy at the velocity zero crossing between jumps
  Vec xA(2);
  xA << 1.0, -v_star;
  auto [xB, t1] = flow_to_event(vf, xA, p, anchor, 30.0, 0.005, 1e-3);
  REQUIRE(xB[0] < 0.0);

  Segment seg1{vf, xB, T_full - t1, p, 4000};
  Segment seg2{vf, xA, t1, p, 4000};
  HybridJunction j{vf, vf, corpus::restitution_jump(), wall, x_hit, p};
  HybridMonodromy m = hybrid_monodromy(seg1, j, seg2);

  // the flow direction is a unit eigenvector of the hybrid monodromy
  const Vec fB = vf.f(xB, p);
  CHECK((m.G_x * fB - fB).norm() <= 1e-6 * fB.norm());
  RowVec w = periodic_left_eigenvector(m.G_x, m.f_start);
  CHECK((w * m.G_x - w).norm() <= 1e-8 * w.norm());

  // period sensitivities against central differences of the measured period
  RowVec dT = hybrid_period_sensitivity(m);
  const double del = 1e-5;
  for (int i = 0; i < 2; ++i) {
    Vec pp = p, pm = p;
    pp[i] += del;
    pm[i] -= del;
    const double Tp = wall_hit(settle(pp), pp).second;
    const double Tm = wall_hit(settle(pm), pm).second;
    const double fd = (Tp - Tm) / (2 * del);
    INFO("parameter " << i);
    CHECK(dT[i] == Catch::Approx(fd).margin(1e-4 * std::max(1.0, std::abs(fd))));
  }
}
