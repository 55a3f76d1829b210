#pragma once

// Invariant curves of a planar map near a Neimark-Sacker bifurcation.
//
// The curve with rotation number rho = p/q is discretized by q samples
// v_i ~ v(phi_i), phi_i = 2 pi (i-1)/q; the map image of v_i must land on
// the rotated sample v_{i+p} (up to a rotation-offset correction
// proportional to drho = rho - p/q). The module provides
//
//  * problem construction on the staged builder: q map-residual blocks
//    with fresh per-instance unknowns, q rotation-coupling blocks, glue
//    blocks collapsing the per-instance parameter copies, one phase
//    condition, and a parameter block (r2, b, drho) with adjoints;
//  * the discrete transfer operator Gamma (rotated block Jacobians minus
//    identity), the projected operator Gamma-hat, their spectra;
//  * stable-fiber tangents q_phi by a power-limit iteration and from the
//    adjoint variables;
//  * an asymptotic-phase decay experiment and a small-divisor diagnostic.

#include "conadj/adjoint.hpp"
#include "conadj/continuation.hpp"
#include "conadj/io.hpp"

#include <cmath>
#include <complex>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace conadj::invc {

/// Truncated normal-form map M(x, r2, b) with rotation angle 2 pi p / q.
struct NSMap {
  int p = 233;
  int q = 377;
  double alpha = 0.25;
  double a = -0.25;
  double r1 = 0.0;
  double theta = 0.0;
  Mat2 mrot;

  NSMap(int p_rot = 233, int q_mesh = 377) : p(p_rot), q(q_mesh) {
    if (q <= 1 || p <= 0 || p >= q || std::gcd(p, q) != 1)
      throw ProblemError("rotation p/q must be a reduced fraction with 0 < p < q");
    theta = 2.0 * M_PI * p / q;
    mrot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  }

  Mat2 cubic_coef(double b) const {
    Mat2 ab;
    ab << a, -b, b, a;
    return ab;
  }

  Vec2 M(const Vec2& x, double r2, double b) const {
    Mat2 rr;
    rr << r1, 0, 0, r2;
    return ((1 + alpha) * mrot + x.squaredNorm() * (mrot * cubic_coef(b)) + rr) * x;
  }

  Mat2 dMx(const Vec2& x, double r2, double b) const {
    Mat2 rr;
    rr << r1, 0, 0, r2;
    return (1 + alpha) * mrot + x.squaredNorm() * (mrot * cubic_coef(b)) + rr +
           2.0 * (mrot * cubic_coef(b)) * x * x.transpose();
  }

  Vec2 dMr2(const Vec2& x) const { return Vec2(0.0, x[1]); }

  Vec2 dMb(const Vec2& x) const {
    Mat2 rot90;
    rot90 << 0, -1, 1, 0;
    return x.squaredNorm() * (mrot * rot90 * x);
  }
};

/// Unit-circle samples v_{0,i} = (cos phi_i, sin phi_i), the exact curve at
/// (r2, b) = (0, 0).
inline Mat initial_curve(int q) {
  Mat v(2, q);
  for (int i = 0; i < q; ++i) {
    const double phi = 2.0 * M_PI * i / q;
    v(0, i) = std::cos(phi);
    v(1, i) = std::sin(phi);
  }
  return v;
}

struct CurveProblem {
  NSMap map;
  AugmentedSystem sys;
  std::vector<std::array<int, 7>> muidx;  // per instance: x(2), y(2), r2, b, drho
};

/// Solution data of one chart, in curve coordinates.
struct CurveState {
  int p = 0, q = 0;
  Mat v;  // 2 x q curve samples
  double r2 = 0.0, b = 0.0, drho = 0.0;
  Mat lam_map;  // 2 x q adjoint samples of the map-residual blocks
  Vec eta;      // (eta_r2, eta_b, eta_rho)
  double lam_ps = 0.0;
};

/// Staged assembly of the discretized curve problem with adjoints.
inline CurveProblem build_curve_problem(int q = 377, int p = 233) {
  NSMap map(p, q);
  const Mat v0 = initial_curve(q);
  ProblemBuilder pb;

  // map-residual blocks: M(x, r2, b) - y = 0 on fresh (x, y, r2, b, drho)
  auto mres = [map](const Vec& u) {
    return Vec(map.M(u.head<2>(), u[4], u[5]) - u.segment<2>(2));
  };
  auto dmres = [map](const Vec& u) {
    Mat J = Mat::Zero(2, 7);
    J.block<2, 2>(0, 0) = map.dMx(u.head<2>(), u[4], u[5]);
    J.block<2, 2>(0, 2) = -Mat2::Identity();
    J.col(4) = map.dMr2(u.head<2>());
    J.col(5) = map.dMb(u.head<2>());
    return J;
  };
  std::vector<std::array<int, 7>> muidx(q);
  for (int i = 0; i < q; ++i) {
    const int irot = (i + p) % q;
    Vec u0(7);
    u0 << v0(0, i), v0(1, i), v0(0, irot), v0(1, irot), 0.0, 0.0, 0.0;
    auto idx = pb.add_zero_block("M" + std::to_string(i), mres, dmres, u0);
    pb.add_adjoint("M" + std::to_string(i));
    std::copy(idx.begin(), idx.end(), muidx[static_cast<size_t>(i)].begin());
  }

  // rotation coupling: x_rot + drho q (x_next - x_rot) - y = 0
  const double dq = q;
  auto fbc = [dq](const Vec& u) {
    return Vec(u.head<2>() + u[6] * dq * (u.segment<2>(2) - u.head<2>()) -
               u.segment<2>(4));
  };
  auto dbc = [dq](const Vec& u) {
    Mat J = Mat::Zero(2, 7);
    J.block<2, 2>(0, 0) = (1.0 - dq * u[6]) * Mat2::Identity();
    J.block<2, 2>(0, 2) = dq * u[6] * Mat2::Identity();
    J.block<2, 2>(0, 4) = -Mat2::Identity();
    J.col(6) = dq * (u.segment<2>(2) - u.head<2>());
    return J;
  };
  for (int i = 0; i < q; ++i) {
    const int irot = (i + p) % q;
    const int inext = (i + p + 1) % q;
    const auto& mi = muidx[static_cast<size_t>(i)];
    const auto& mr = muidx[static_cast<size_t>(irot)];
    const auto& mn = muidx[static_cast<size_t>(inext)];
    const std::vector<int> uidx = {mr[0], mr[1], mn[0], mn[1], mi[2], mi[3], mi[6]};
    pb.add_zero_block("bc" + std::to_string(i), fbc, dbc, uidx);
    pb.add_adjoint("bc" + std::to_string(i), {}, uidx);
  }

  // collapse the per-instance parameter copies onto instance 0
  for (int i = 1; i < q; ++i) {
    const auto& m0 = muidx[0];
    const auto& mi = muidx[static_cast<size_t>(i)];
    const std::vector<int> lhs = {m0[4], m0[5], m0[6]};
    const std::vector<int> rhs = {mi[4], mi[5], mi[6]};
    pb.add_glue("pglue" + std::to_string(i), lhs, rhs);
    std::vector<int> aidx(lhs);
    aidx.insert(aidx.end(), rhs.begin(), rhs.end());
    pb.add_adjoint("pglue" + std::to_string(i), {}, aidx);
  }

  // phase condition: forward-difference tangent of the initial curve
  // against the deviation from it
  Vec dx0(2 * q), v0flat(2 * q);
  for (int i = 0; i < q; ++i) {
    const int inext = (i + 1) % q;
    dx0.segment<2>(2 * i) = dq * (v0.col(inext) - v0.col(i));
    v0flat.segment<2>(2 * i) = v0.col(i);
  }
  std::vector<int> xidx;
  xidx.reserve(static_cast<size_t>(2 * q));
  for (int i = 0; i < q; ++i) {
    xidx.push_back(muidx[static_cast<size_t>(i)][0]);
    xidx.push_back(muidx[static_cast<size_t>(i)][1]);
  }
  pb.add_zero_block(
      "phasecond",
      [dx0, v0flat](const Vec& u) {
        Vec r(1);
        r[0] = dx0.dot(u - v0flat);
        return r;
      },
      [dx0](const Vec&) { return Mat(dx0.transpose()); }, xidx);
  pb.add_adjoint("phasecond", {}, xidx);

  // continuation parameters on instance 0, with eta_rho = 1
  const std::vector<int> pidx = {muidx[0][4], muidx[0][5], muidx[0][6]};
  pb.add_parameters("pars", pidx, {"r2", "b", "drho"});
  Vec l0(3);
  l0 << 0.0, 0.0, 1.0;
  pb.add_adjoint("pars", {"e.r2", "e.b", "e.drho"}, pidx, l0);

  return CurveProblem{map, pb.assemble(), std::move(muidx)};
}

inline CurveState extract_state(const CurveProblem& cp, const Chart& c) {
  CurveState cs;
  cs.p = cp.map.p;
  cs.q = cp.map.q;
  cs.v.resize(2, cs.q);
  cs.lam_map.resize(2, cs.q);
  for (int i = 0; i < cs.q; ++i) {
    const auto& mi = cp.muidx[static_cast<size_t>(i)];
    cs.v.col(i) = Vec2(c.u[mi[0]], c.u[mi[1]]);
    cs.lam_map.col(i) = cp.sys.block_adjoint(c, "M" + std::to_string(i));
  }
  cs.r2 = c.u[cp.muidx[0][4]];
  cs.b = c.u[cp.muidx[0][5]];
  cs.drho = c.u[cp.muidx[0][6]];
  cs.eta = c.eta;
  cs.lam_ps = cp.sys.block_adjoint(c, "phasecond")[0];
  return cs;
}

/// Continuation of the fixed-rotation-number family over an r2 window with
/// the adjoint normalization eta_rho = 1.
inline RunStore run_curve_window(const CurveProblem& cp, double r2_lo, double r2_hi,
                                 const std::vector<UserEvent>& events = {},
                                 std::ostream* log = nullptr,
                                 const std::function<void(ContinuationSettings&)>& tweak = {}) {
  ActiveSet act;
  act.released = {"r2", "b", "e.r2", "e.b"};
  act.windows["r2"] = {r2_lo, r2_hi};
  ContinuationSettings cfg;
  cfg.npr = 1;
  cfg.events = events;
  cfg.log = log;
  if (tweak) tweak(cfg);
  return Continuation(cp.sys, act, cfg).run(cp.sys.initial_chart());
}

/// The published sweep: r2 in [-0.9, 0], recording the user event 'A' at
/// r2 = -0.16, saved under run name "curve".
inline RunStore run_curve_continuation(const std::filesystem::path& root,
                                       const CurveProblem& cp,
                                       std::ostream* log = nullptr,
                                       const std::function<void(ContinuationSettings&)>& tweak = {}) {
  RunStore store = run_curve_window(cp, -0.9, 0.0, {UserEvent{"A", "r2", -0.16}}, log, tweak);
  save_run(root, "curve", cp.sys, store);
  return store;
}

/// Central-difference tangent samples v'(phi_i), 2 x q.
inline Mat discrete_tangent(const CurveState& cs) {
  Mat t(2, cs.q);
  const double scale = cs.q / (4.0 * M_PI);
  for (int i = 0; i < cs.q; ++i) {
    const int ip = (i + 1) % cs.q;
    const int im = (i + cs.q - 1) % cs.q;
    t.col(i) = scale * (cs.v.col(ip) - cs.v.col(im));
  }
  return t;
}

/// Discrete rotated transfer operator: block row i holds
/// dMx(v_{i-p}, r2, b) in block column (i - p) mod q. Subtracting the
/// identity gives the discrete form of delta -> V(.-rho) delta(.-rho) - delta.
inline Mat gamma_rho_plus_identity(const NSMap& map, const CurveState& cs) {
  const int q = cs.q;
  Mat A = Mat::Zero(2 * q, 2 * q);
  for (int i = 0; i < q; ++i) {
    const int j = (i + q - map.p) % q;
    A.block<2, 2>(2 * i, 2 * j) = map.dMx(cs.v.col(j), cs.r2, cs.b);
  }
  return A;
}

inline Mat gamma_rho_matrix(const NSMap& map, const CurveState& cs) {
  Mat A = gamma_rho_plus_identity(map, cs);
  A -= Mat::Identity(2 * cs.q, 2 * cs.q);
  return A;
}

/// Forward-difference tangent samples q (v_{i+1} - v_i) / (2 pi), 2 x q,
/// matching the differencing used by the phase condition.
inline Mat forward_tangent(const CurveState& cs) {
  Mat t(2, cs.q);
  const double scale = cs.q / (2.0 * M_PI);
  for (int i = 0; i < cs.q; ++i)
    t.col(i) = scale * (cs.v.col((i + 1) % cs.q) - cs.v.col(i));
  return t;
}

/// Root-mean-square defect of the discrete transfer operator applied to the
/// forward-difference tangent: the discretization of the exact nullvector
/// relation, decaying like O(1/q) under mesh refinement.
inline double gamma_tangent_defect(const NSMap& map, const CurveState& cs) {
  const Mat vp = forward_tangent(cs);
  Vec vpf(2 * cs.q);
  for (int i = 0; i < cs.q; ++i) vpf.segment<2>(2 * i) = vp.col(i);
  const Vec d = gamma_rho_matrix(map, cs) * vpf;
  return std::sqrt(d.squaredNorm() / cs.q);
}

/// Stable-fiber tangent rows q_phi^T(phi_i), 2 x q (column i is the row
/// vector for node i). Fixed-point iteration of the shift relation
/// q_phi^T(phi) = q_phi^T(phi + rho) V(phi), started from the normalized
/// curve tangent, then re-normalized so q_phi^T v' = 1 pointwise.
inline Mat q_phi_limit(const NSMap& map, const CurveState& cs, int k_max = 10000) {
  const int q = cs.q;
  const Mat vp = discrete_tangent(cs);
  Mat r(2, q);
  for (int i = 0; i < q; ++i) r.col(i) = vp.col(i) / vp.col(i).squaredNorm();

  std::vector<Mat2> V(static_cast<size_t>(q));
  for (int i = 0; i < q; ++i)
    V[static_cast<size_t>(i)] = map.dMx(cs.v.col(i), cs.r2, cs.b);

  Mat next(2, q);
  for (int k = 0; k < k_max; ++k) {
    for (int i = 0; i < q; ++i) {
      const int ip = (i + map.p) % q;
      next.col(i) = V[static_cast<size_t>(i)].transpose() * r.col(ip);
    }
    // renormalize against the tangent to fix the free scale per sweep
    double change = 0.0;
    for (int i = 0; i < q; ++i) {
      const double s = next.col(i).dot(vp.col(i));
      if (std::abs(s) < 1e-14)
        throw SolveError("fiber iteration lost transversality at node " +
                         std::to_string(i));
      next.col(i) /= s;
      change = std::max(change, (next.col(i) - r.col(i)).norm());
    }
    r = next;
    if (change < 1e-10) return r;
  }
  throw SolveError("fiber iteration did not converge in k_max sweeps");
}

/// Fiber tangents from the adjoint samples: the multiplier of the map
/// residual at node (i - p) mod q points along q_phi(phi_i) up to the
/// discretization scale, which the q_phi^T v' = 1 normalization removes.
inline Mat fiber_from_adjoint(const CurveState& cs) {
  const int q = cs.q;
  const Mat vp = discrete_tangent(cs);
  Mat r(2, q);
  for (int i = 0; i < q; ++i) {
    const Vec2 m = cs.lam_map.col((i + q - cs.p) % q);
    const double s = m.dot(vp.col(i));
    if (std::abs(s) < 1e-14)
      throw SolveError("adjoint fiber sample orthogonal to the tangent at node " +
                       std::to_string(i));
    r.col(i) = m / s;
  }
  return r;
}

/// Projected transfer operator plus identity: block row i holds
/// dMx(v_j) (I - v'_j q_phi_j^T) in block column j = (i - p) mod q.
inline Mat gamma_hat_plus_identity(const NSMap& map, const CurveState& cs,
                                   const Mat& qphi) {
  const int q = cs.q;
  const Mat vp = discrete_tangent(cs);
  Mat A = Mat::Zero(2 * q, 2 * q);
  for (int i = 0; i < q; ++i) {
    const int j = (i + q - map.p) % q;
    const Mat2 qtr = Mat2::Identity() - vp.col(j) * qphi.col(j).transpose();
    A.block<2, 2>(2 * i, 2 * j) = map.dMx(cs.v.col(j), cs.r2, cs.b) * qtr;
  }
  return A;
}

/// Spectral radius estimate by power iteration: geometric mean of the
/// growth factors after a burn-in, robust to complex dominant pairs.
inline double spectral_radius_power(const Mat& A, int burn_in = 200, int iters = 5000) {
  std::mt19937 rng(12345);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec x(A.cols());
  for (int k = 0; k < x.size(); ++k) x[k] = gauss(rng);
  x.normalize();
  for (int k = 0; k < burn_in; ++k) {
    x = A * x;
    const double n = x.norm();
    if (n == 0.0) return 0.0;
    x /= n;
  }
  double log_sum = 0.0;
  for (int k = 0; k < iters; ++k) {
    x = A * x;
    const double n = x.norm();
    if (n == 0.0) return 0.0;
    log_sum += std::log(n);
    x /= n;
  }
  return std::exp(log_sum / iters);
}

/// max |1 + z| over eigenvalues z of Gamma-hat (power iteration).
inline double gamma_hat_radius(const NSMap& map, const CurveState& cs, const Mat& qphi) {
  return spectral_radius_power(gamma_hat_plus_identity(map, cs, qphi));
}

/// Full eigenvalue set of Gamma-hat (dense solve; intended for the reduced
/// meshes).
inline std::vector<std::complex<double>> gamma_hat_spectrum_full(const NSMap& map,
                                                                 const CurveState& cs,
                                                                 const Mat& qphi) {
  Mat A = gamma_hat_plus_identity(map, cs, qphi);
  A -= Mat::Identity(A.rows(), A.cols());
  Eigen::EigenSolver<Mat> es(A);
  std::vector<std::complex<double>> out;
  out.reserve(static_cast<size_t>(A.rows()));
  for (int k = 0; k < A.rows(); ++k) out.push_back(es.eigenvalues()[k]);
  return out;
}

/// Gap norms between forward iterates of v_{i0} + delta0 and of the
/// fiber-projected phase-shifted start v_{i0} + v'(phi_{i0}) q_phi^T delta0.
inline std::vector<double> phase_decay_experiment(const NSMap& map, const CurveState& cs,
                                                  const Mat& qphi, int i0,
                                                  const Vec2& delta0, int k_max = 200) {
  if (i0 < 0 || i0 >= cs.q) throw ProblemError("phase decay: node index out of range");
  const Mat vp = discrete_tangent(cs);
  Vec2 za = cs.v.col(i0) + delta0;
  Vec2 zb = cs.v.col(i0) + vp.col(i0) * qphi.col(i0).dot(delta0);
  std::vector<double> gap;
  gap.reserve(static_cast<size_t>(k_max) + 1);
  gap.push_back((za - zb).norm());
  for (int k = 0; k < k_max; ++k) {
    za = map.M(za, cs.r2, cs.b);
    zb = map.M(zb, cs.r2, cs.b);
    if (!za.allFinite() || !zb.allFinite())
      throw SolveError("phase decay iteration diverged");
    gap.push_back((za - zb).norm());
  }
  return gap;
}

/// Divisor magnitudes |1 - e^{-2 pi i k rho}| = 2 |sin(pi k rho)| for
/// k = 1..k_max.
inline std::vector<std::pair<int, double>> small_divisor_diagnostic(double rho,
                                                                    int k_max) {
  std::vector<std::pair<int, double>> out;
  out.reserve(static_cast<size_t>(k_max));
  for (int k = 1; k <= k_max; ++k)
    out.emplace_back(k, 2.0 * std::abs(std::sin(M_PI * k * rho)));
  return out;
}

/// Indices where the divisor magnitude reaches a new running minimum.
inline std::vector<int> divisor_argmin_sequence(double rho, int k_max) {
  std::vector<int> mins;
  double best = 3.0;
  for (const auto& [k, d] : small_divisor_diagnostic(rho, k_max))
    if (d < best) {
      best = d;
      mins.push_back(k);
    }
  return mins;
}

}  // namespace conadj::invc
