#pragma once

// Demo problem: harmonic response of two linear oscillators
//
//   x'' + 2 ze x' + x = cos(o t)
//
// driven at frequencies o1 and o2 = o1 - ep. The unknowns are the response
// coefficients and amplitudes (a1, b1, c1, a2, b2, c2), the two frequencies,
// the damping ratio and the frequency offset:
//
//   u = (a1, b1, c1, a2, b2, c2, o1, o2, ze, ep).
//
// Seven algebraic equations pin the harmonic balance; four monitor rows
// track the amplitude difference 'da' = c1 - c2, the mean frequency
// 'av' = (o1 + o2)/2, and the parameters 'ep' and 'ze'. The sensitivity of
// 'da' to 'av' has a sign change (an inflection point of the single
// oscillator's frequency response) at the roots of a sextic in av.

#include "conadj/adjoint.hpp"
#include "conadj/continuation.hpp"
#include "conadj/io.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace conadj::osc {

inline Vec default_u0() {
  Vec u0(10);
  u0 << -0.49, 4.9, 4.9, 0.0, 5.0, 5.0, 1.01, 1.0, 0.1, 0.01;
  return u0;
}

inline Vec phi(const Vec& u) {
  const double a1 = u[0], b1 = u[1], c1 = u[2], a2 = u[3], b2 = u[4], c2 = u[5],
               o1 = u[6], o2 = u[7], ze = u[8], ep = u[9];
  Vec f(7);
  f << c1 * c1 - a1 * a1 - b1 * b1,
      c2 * c2 - a2 * a2 - b2 * b2,
      o1 - o2 - ep,
      (1 - o1 * o1) * a1 + 2 * ze * o1 * b1 - 1,
      (1 - o1 * o1) * b1 - 2 * ze * o1 * a1,
      (1 - o2 * o2) * a2 + 2 * ze * o2 * b2 - 1,
      (1 - o2 * o2) * b2 - 2 * ze * o2 * a2;
  return f;
}

inline Mat dphi(const Vec& u) {
  const double a1 = u[0], b1 = u[1], c1 = u[2], a2 = u[3], b2 = u[4], c2 = u[5],
               o1 = u[6], o2 = u[7], ze = u[8];
  Mat J = Mat::Zero(7, 10);
  J(0, 0) = -2 * a1; J(0, 1) = -2 * b1; J(0, 2) = 2 * c1;
  J(1, 3) = -2 * a2; J(1, 4) = -2 * b2; J(1, 5) = 2 * c2;
  J(2, 6) = 1; J(2, 7) = -1; J(2, 9) = -1;
  J(3, 0) = 1 - o1 * o1; J(3, 1) = 2 * ze * o1;
  J(3, 6) = -2 * o1 * a1 + 2 * ze * b1; J(3, 8) = 2 * o1 * b1;
  J(4, 0) = -2 * ze * o1; J(4, 1) = 1 - o1 * o1;
  J(4, 6) = -2 * o1 * b1 - 2 * ze * a1; J(4, 8) = -2 * o1 * a1;
  J(5, 3) = 1 - o2 * o2; J(5, 4) = 2 * ze * o2;
  J(5, 7) = -2 * o2 * a2 + 2 * ze * b2; J(5, 8) = 2 * o2 * b2;
  J(6, 3) = -2 * ze * o2; J(6, 4) = 1 - o2 * o2;
  J(6, 7) = -2 * o2 * b2 - 2 * ze * a2; J(6, 8) = -2 * o2 * a2;
  return J;
}

inline Vec psi(const Vec& u) {
  Vec f(4);
  f << u[2] - u[5], (u[6] + u[7]) / 2, u[9], u[8];
  return f;
}

inline Mat dpsi(const Vec&) {
  Mat J = Mat::Zero(4, 10);
  J(0, 2) = 1; J(0, 5) = -1;
  J(1, 6) = 0.5; J(1, 7) = 0.5;
  J(2, 9) = 1;
  J(3, 8) = 1;
  return J;
}

/// Amplitude difference c1 - c2 as an explicit function of the mean
/// frequency av, the frequency offset ep and the damping ratio ze (with
/// c1, c2 > 0).
inline double delta_closed_form(double av, double ep, double ze) {
  auto amp = [ze](double w) {
    const double d = 1 - w * w;
    return 1.0 / std::sqrt(d * d + 4 * ze * ze * w * w);
  };
  return amp(av + ep / 2) - amp(av - ep / 2);
}

/// The inflection points of the single-oscillator amplitude response are
/// the positive roots of this sextic in the frequency w.
inline double inflection_residual(double w, double ze) {
  const double w2 = w * w, z2 = ze * ze;
  return 3 * w2 * w2 * w2 + 5 * (2 * z2 - 1) * w2 * w2 +
         (16 * z2 * z2 - 16 * z2 + 1) * w2 + 1 - 2 * z2;
}

namespace detail {

template <typename Fn>
double bisect_root(const Fn& fn, double lo, double hi) {
  double flo = fn(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = fn(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// The two inflection frequencies bracketing w = 1, by bisection.
inline std::pair<double, double> inflection_frequencies(double ze) {
  auto fn = [ze](double w) { return inflection_residual(w, ze); };
  return {detail::bisect_root(fn, 0.7, 1.0), detail::bisect_root(fn, 1.0, 1.3)};
}

/// Derivative of the closed-form amplitude difference with respect to the
/// mean frequency. Its roots are the fold locations of da along av; for
/// ep -> 0 they approach the inflection frequencies, at finite ep they sit
/// an O(ep^2) distance away.
inline double fold_residual(double av, double ep, double ze) {
  auto damp = [ze](double w) {
    const double d = 1 - w * w;
    const double a = 1.0 / std::sqrt(d * d + 4 * ze * ze * w * w);
    return 2 * w * a * a * a * (d - 2 * ze * ze);
  };
  return damp(av + ep / 2) - damp(av - ep / 2);
}

/// The two fold frequencies bracketing av = 1 at offset ep, by bisection.
inline std::pair<double, double> fold_frequencies(double ep, double ze) {
  auto fn = [ep, ze](double av) { return fold_residual(av, ep, ze); };
  return {detail::bisect_root(fn, 0.7, 1.0), detail::bisect_root(fn, 1.0, 1.3)};
}

/// Build the extended problem. When l0 vectors are given the adjoint
/// variables start there (restart); otherwise they start at zero.
inline AugmentedSystem build_problem(const Vec& u0, bool with_adjoints = true,
                                     const Vec& lam0 = Vec(), const Vec& eta0 = Vec()) {
  ProblemBuilder pb;
  std::vector<int> uidx = pb.add_zero_block("phi", phi, dphi, u0);
  pb.add_monitor_block("psi", psi, dpsi, {"da", "av", "ep", "ze"}, uidx);
  if (with_adjoints) {
    pb.add_adjoint("phi", {}, {}, lam0);
    pb.add_adjoint("psi", {"e.da", "e.av", "e.ep", "e.ze"}, uidx, eta0);
  }
  return pb.assemble();
}

/// First sweep: release the amplitude difference and all complementary
/// parameters, drive e.da across [0, 1]. The e.da = 1 endpoint carries the
/// adjoint variables scaled to the normalization eta_da = 1.
inline RunStore run_first(const std::filesystem::path& root, std::ostream* log = nullptr,
                          const std::function<void(ContinuationSettings&)>& tweak = {}) {
  AugmentedSystem sys = build_problem(default_u0());
  ActiveSet act;
  act.released = {"da", "e.da", "e.av", "e.ep", "e.ze"};
  act.windows["e.da"] = {0.0, 1.0};
  ContinuationSettings cfg;
  cfg.log = log;
  if (tweak) tweak(cfg);
  RunStore store = Continuation(sys, act, cfg).run(sys.initial_chart());
  save_run(root, "run1", sys, store);
  return store;
}

/// The chart of a stored run where label `lbl` is closest to `value`.
inline const Chart& chart_nearest(const RunStore& store, const AugmentedSystem& sys,
                                  const std::string& lbl, double value) {
  const Chart* best = nullptr;
  double dist = 0.0;
  for (const Chart& c : store.charts) {
    const double d = std::abs(sys.value(c, lbl) - value);
    if (!best || d < dist) {
      best = &c;
      dist = d;
    }
  }
  if (!best) throw IoError("empty run store");
  return *best;
}

/// Second sweep: restart from the e.da = 1 endpoint of run1 (primal and
/// adjoint state read back from disk), release the mean frequency and sweep
/// av across [0.5, 2.5]. Fold points of da locate the inflection
/// frequencies.
inline RunStore run_second(const std::filesystem::path& root, std::ostream* log = nullptr,
                           const std::function<void(ContinuationSettings&)>& tweak = {}) {
  AugmentedSystem probe = build_problem(default_u0());
  RunStore prev = load_run(root, "run1");
  const Chart& endpoint = chart_nearest(prev, probe, "e.da", 1.0);

  AugmentedSystem sys =
      build_problem(endpoint.u, true, endpoint.lam, endpoint.eta);
  ActiveSet act;
  act.released = {"da", "av", "e.av", "e.ep", "e.ze"};
  act.windows["av"] = {0.5, 2.5};
  ContinuationSettings cfg;
  cfg.it_mx = 500;
  cfg.npr = 100;
  cfg.log = log;
  if (tweak) tweak(cfg);
  RunStore store = Continuation(sys, act, cfg).run(sys.initial_chart());
  save_run(root, "run2", sys, store);
  return store;
}

}  // namespace conadj::osc
