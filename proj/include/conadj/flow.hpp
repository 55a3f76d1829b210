#pragma once

// Trajectory-segment sensitivities for autonomous vector fields in rescaled
// time x' = T f(x, p), tau in [0, 1]:
//
//  * joint fixed-step RK4 integration of the state x, the state-transition
//    matrix X (X' = T fx X, X(0) = I) and the parameter sensitivity P
//    (P' = T fx P + T fp, P(0) = 0);
//  * Poincare-section sensitivities through the projection
//    Pi = I - f hx / (hx f);
//  * the left eigenvector w of the monodromy matrix at eigenvalue 1 with
//    w^T f(x(1), p) = -1, whose product with P(1) is the sensitivity of the
//    period to the parameters;
//  * the asymptotic-phase gradient lim_k f^T X(k) / ||f||^2 of a
//    transversally stable limit cycle.
//
// Event-detecting helpers (fixed-step sweep plus bisection on the event
// function) back the finite-difference oracles in the test suite.

#include "conadj/types.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>

namespace conadj {

struct VectorField {
  int n = 0;
  int q = 0;
  std::function<Vec(const Vec&, const Vec&)> f;
  std::function<Mat(const Vec&, const Vec&)> fx;
  std::function<Mat(const Vec&, const Vec&)> fp;
};

struct Segment {
  VectorField field;
  Vec x0;
  double T = 1.0;
  Vec p;
  int n_steps = 1000;
};

struct SegmentSensitivity {
  Vec x1;
  Vec fx1;  // f(x(1), p)
  Mat X1;
  Mat P1;
};

struct Section {
  std::function<double(const Vec&, const Vec&)> h;
  std::function<RowVec(const Vec&, const Vec&)> hx;
  std::function<RowVec(const Vec&, const Vec&)> hp;
};

namespace detail {

/// One RK4 step of the joint (x, X, P) system with step size dt of the
/// rescaled-time right-hand side (T f, T fx X, T fx P + T fp).
template <typename StateDeriv, typename State>
State rk4_step(const StateDeriv& deriv, const State& y, double dt) {
  State k1 = deriv(y);
  State k2 = deriv(y + 0.5 * dt * k1);
  State k3 = deriv(y + 0.5 * dt * k2);
  State k4 = deriv(y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// Plain state integration over duration t (not rescaled), fixed-step RK4.
inline Vec flow_fixed(const VectorField& vf, const Vec& x0, const Vec& p, double t,
                      int n_steps) {
  Vec x = x0;
  const double dt = t / n_steps;
  auto deriv = [&](const Vec& y) { return vf.f(y, p); };
  for (int k = 0; k < n_steps; ++k) x = detail::rk4_step(deriv, x, dt);
  if (!x.allFinite()) throw SolveError("flow integration diverged");
  return x;
}

inline SegmentSensitivity segment_sensitivities(const Segment& seg) {
  const int n = seg.field.n, q = seg.field.q;
  // packed state [x | vec(X) | vec(P)] advanced jointly
  Vec y(n + n * n + n * q);
  y.head(n) = seg.x0;
  Eigen::Map<Mat>(y.data() + n, n, n) = Mat::Identity(n, n);
  y.tail(n * q).setZero();

  auto deriv = [&](const Vec& yy) {
    Vec d(yy.size());
    const Vec x = yy.head(n);
    const Mat X = Eigen::Map<const Mat>(yy.data() + n, n, n);
    const Mat P = Eigen::Map<const Mat>(yy.data() + n + n * n, n, q);
    const Mat J = seg.field.fx(x, seg.p);
    d.head(n) = seg.T * seg.field.f(x, seg.p);
    Eigen::Map<Mat>(d.data() + n, n, n) = seg.T * J * X;
    Eigen::Map<Mat>(d.data() + n + n * n, n, q) =
        seg.T * (J * P + seg.field.fp(x, seg.p));
    return d;
  };

  const double dt = 1.0 / seg.n_steps;
  for (int k = 0; k < seg.n_steps; ++k) y = detail::rk4_step(deriv, y, dt);
  if (!y.allFinite()) throw SolveError("variational integration diverged");

  SegmentSensitivity out;
  out.x1 = y.head(n);
  out.fx1 = seg.field.f(out.x1, seg.p);
  out.X1 = Eigen::Map<const Mat>(y.data() + n, n, n);
  out.P1 = Eigen::Map<const Mat>(y.data() + n + n * n, n, q);
  return out;
}

struct SectionSensitivity {
  Mat dx1_dx0;   // Pi X1
  Mat dx1_dp;    // Pi P1 - f hp / Lfh
  Vec dx1_dh;    // f / Lfh
  RowVec dT_dx0; // -hx X1 / Lfh
  RowVec dT_dp;  // -(hx P1 + hp) / Lfh
  double dT_dh = 0.0;  // 1 / Lfh
  Mat Pi;
  double lie = 0.0;
};

inline SectionSensitivity section_sensitivities(const Segment& seg, const Section& sec) {
  SegmentSensitivity ss = segment_sensitivities(seg);
  const RowVec hx = sec.hx(ss.x1, seg.p);
  const RowVec hp = sec.hp(ss.x1, seg.p);
  const double lie = hx.dot(ss.fx1);
  if (std::abs(lie) < 1e-10)
    throw SolveError("section sensitivities: trajectory tangent to the section");

  SectionSensitivity out;
  out.lie = lie;
  out.Pi = Mat::Identity(seg.field.n, seg.field.n) - (ss.fx1 * hx) / lie;
  out.dx1_dx0 = out.Pi * ss.X1;
  out.dx1_dp = out.Pi * ss.P1 - (ss.fx1 * hp) / lie;
  out.dx1_dh = ss.fx1 / lie;
  out.dT_dx0 = -(hx * ss.X1) / lie;
  out.dT_dp = -(hx * ss.P1 + hp) / lie;
  out.dT_dh = 1.0 / lie;
  return out;
}

/// Left eigenvector w of X1 at eigenvalue 1, normalized w^T f1 = -1.
/// Inverse iteration on (X1 - I)^T with a small regularizing shift, one
/// Rayleigh refinement, and a simplicity check on the eigenvalue.
inline RowVec periodic_left_eigenvector(const Mat& X1, const Vec& f1) {
  const int n = static_cast<int>(X1.rows());
  {
    // eigenvalue 1 must be simple
    Eigen::EigenSolver<Mat> es(X1);
    int near_one = 0;
    for (int k = 0; k < n; ++k)
      if (std::abs(es.eigenvalues()[k] - std::complex<double>(1.0, 0.0)) < 1e-6)
        ++near_one;
    if (near_one != 1)
      throw SolveError("monodromy eigenvalue 1 is not simple (multiplicity " +
                       std::to_string(near_one) + ")");
  }

  Mat A = (X1 - Mat::Identity(n, n)).transpose();
  const double shift = 1e-10;
  Eigen::PartialPivLU<Mat> lu(A + shift * Mat::Identity(n, n));
  Vec w = Vec::Ones(n).normalized();
  for (int it = 0; it < 50; ++it) {
    Vec w_new = lu.solve(w);
    w_new.normalize();
    if ((w_new - w).norm() < 1e-14 || (w_new + w).norm() < 1e-14) {
      w = w_new;
      break;
    }
    w = w_new;
  }
  // one Rayleigh refinement at the current eigenvalue estimate
  const double mu = w.dot(A * w);
  Eigen::FullPivLU<Mat> lu2(A - mu * Mat::Identity(n, n));
  if (lu2.isInvertible()) {
    Vec w_ref = lu2.solve(w);
    if (w_ref.allFinite() && w_ref.norm() > 0) w = w_ref.normalized();
  }

  const double scale = w.dot(f1);
  if (std::abs(scale) < 1e-12)
    throw SolveError("left eigenvector orthogonal to the vector field");
  return RowVec(-w.transpose() / scale);
}

/// Sensitivity of the period to the parameters: w^T P1 with w^T f1 = -1.
inline RowVec period_sensitivity(const RowVec& w, const Mat& P1) { return w * P1; }

/// Asymptotic-phase gradient of a transversally stable limit cycle:
/// lambda^T = lim_k f^T X(k) / ||f||^2, computed with k doubling through
/// repeated squaring of the monodromy matrix.
inline RowVec asymptotic_phase_gradient(const Mat& X1, const Vec& f0, int k_max = 4096) {
  RowVec base = f0.transpose() / f0.squaredNorm();
  Mat A = X1;  // X(2^j)
  RowVec lam = base * A;
  for (int k = 2; k <= k_max; k *= 2) {
    A = A * A;
    RowVec next = base * A;
    if ((next - lam).norm() < 1e-10) return next;
    lam = next;
    if (!lam.allFinite())
      throw SolveError("asymptotic phase iteration diverged (orbit not stable?)");
  }
  throw SolveError("asymptotic phase iteration did not converge");
}

/// First crossing of section h after t_min: fixed-step sweep for a sign
/// change, then bisection on the integrated substate to 1e-12 in time.
inline std::pair<Vec, double> flow_to_event(const VectorField& vf, const Vec& x0,
                                            const Vec& p, const Section& sec,
                                            double t_max, double dt, double t_min = 0.0) {
  Vec x = x0;
  double t = 0.0;
  auto deriv = [&](const Vec& y) { return vf.f(y, p); };
  double h_prev = sec.h(x, p);
  while (t < t_max) {
    Vec x_next = detail::rk4_step(deriv, x, dt);
    const double t_next = t + dt;
    const double h_next = sec.h(x_next, p);
    if (t_next > t_min && h_prev != 0.0 && (h_prev > 0) != (h_next > 0)) {
      // bisection on the substep offset
      double lo = 0.0, hi = dt;
      for (int it = 0; it < 60 && hi - lo > 1e-13 * std::max(1.0, t_next); ++it) {
        const double mid = 0.5 * (lo + hi);
        const Vec xm = detail::rk4_step(deriv, x, mid);
        if ((sec.h(xm, p) > 0) == (h_prev > 0))
          lo = mid;
        else
          hi = mid;
      }
      const double off = 0.5 * (lo + hi);
      return {detail::rk4_step(deriv, x, off), t + off};
    }
    x = x_next;
    t = t_next;
    h_prev = h_next;
    if (!x.allFinite()) throw SolveError("event sweep diverged");
  }
  throw SolveError("no section crossing before t_max");
}

}  // namespace conadj
