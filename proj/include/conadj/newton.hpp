#pragma once

// Damped Newton corrector on the augmented system with one released value
// per rank deficit plus one, closed by a border row. Two border modes:
//
//  * fixed border (continuation step): the previous unit tangent closes the
//    system and the correction is plain bordered Newton;
//  * free border (initial correction / restart): the border only selects a
//    kernel direction, and each Newton step is projected onto the complement
//    of the current kernel so the corrector converges to the nearest point
//    of the solution manifold instead of a point pinned by the border.

#include "conadj/linear.hpp"
#include "conadj/problem.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

namespace conadj {

struct CorrectorSettings {
  double tol = 1e-6;
  int max_iter = 10;
  int max_damping = 8;  // halvings of the step before giving up
};

struct IterRecord {
  int iter = 0;
  double gamma = 1.0;
  double norm_d = 0.0;
  double norm_f = 0.0;
  double norm_U = 0.0;
};

struct CorrectResult {
  bool converged = false;
  Chart chart;           // updated u/lam and released mu/eta values
  Vec tangent;           // unit kernel at the accepted point
  std::vector<IterRecord> history;
};

namespace detail {

/// Heuristic border used when no tangent is available yet: the unit row on
/// the first released unknown, falling back to the full-gradient row if the
/// resulting system is singular.
inline std::unique_ptr<BorderedSolver> make_free_border(const AugmentedSystem& sys, const Vec& x,
                                       const std::vector<Slot>& released,
                                       const std::vector<Triplet>& trip, int m, int n) {
  const int rel_col0 = sys.n_u() + sys.n_lambda();
  for (size_t k = 0; k < released.size(); ++k) {
    Vec b = Vec::Zero(n);
    b[rel_col0 + static_cast<int>(k)] = 1.0;
    try {
      return std::make_unique<BorderedSolver>(m, n, trip, b);
    } catch (const SolveError&) {
      // border parallel to the kernel at this point: try the next label
    }
  }
  (void)x;
  throw SolveError("corrector: no released label yields a nonsingular border");
}

}  // namespace detail

/// Correct a chart onto the solution manifold. If `border` is given it is
/// used as a fixed closing row (pseudo-arclength step); otherwise the border
/// is free and steps are projected onto the kernel complement.
inline CorrectResult correct(const AugmentedSystem& sys, const Chart& start,
                             const std::vector<Slot>& released,
                             const CorrectorSettings& cs = {},
                             const std::optional<Vec>& border = std::nullopt) {
  const int n = sys.n_unknowns(released);
  const int m = n - 1;
  if (sys.residual_dim() != m)
    throw ProblemError("corrector: released-label count must equal rank deficit + 1");

  CorrectResult res;
  res.chart = start;
  Vec x = sys.pack(start, released);

  auto eval_f = [&](const Vec& xv, Chart& c) {
    sys.unpack(xv, released, c);
    return sys.residual(c);
  };

  Chart cur = start;
  Vec f = eval_f(x, cur);
  double nf = f.norm();

  IterRecord r0;
  r0.iter = 0;
  r0.norm_f = nf;
  r0.norm_U = cur.norm_U_value();
  res.history.push_back(r0);

  Vec kernel;  // most recent kernel (free-border mode)
  bool accepted = nf <= cs.tol;  // accept immediately only at a solution

  for (int it = 1; it <= cs.max_iter && !accepted; ++it) {
    const auto trip = sys.jacobian_triplets(cur.u, cur.mu, cur.lam, cur.eta, released);
    std::unique_ptr<BorderedSolver> slv;
    if (border) {
      slv = std::make_unique<BorderedSolver>(m, n, trip, *border);
    } else {
      slv = detail::make_free_border(sys, x, released, trip, m, n);
      kernel = slv->kernel();
    }

    Vec rhs = Vec::Zero(n);
    rhs.head(m) = -f;
    Vec d = slv->solve(rhs);
    if (!border) d -= kernel.dot(d) * kernel;

    // damped line search: accept gamma*d when the residual shrinks enough
    double gamma = 1.0;
    Vec x_new;
    Chart c_new = cur;
    Vec f_new;
    double nf_new = 0.0;
    bool ok = false;
    for (int dmp = 0; dmp <= cs.max_damping; ++dmp) {
      x_new = x + gamma * d;
      try {
        f_new = eval_f(x_new, c_new);
        nf_new = f_new.norm();
        if (nf_new <= (1.0 - gamma / 4.0) * nf || nf <= cs.tol) {
          ok = true;
          break;
        }
      } catch (const EvalError&) {
        // step left the domain of a block evaluation: damp and retry
      }
      gamma /= 2.0;
    }
    if (!ok) return res;  // not converged

    x = x_new;
    cur = c_new;
    f = f_new;
    nf = nf_new;

    IterRecord rec;
    rec.iter = it;
    rec.gamma = gamma;
    rec.norm_d = (gamma * d).norm();
    rec.norm_f = nf;
    rec.norm_U = cur.norm_U_value();
    res.history.push_back(rec);

    accepted = nf <= cs.tol && rec.norm_d <= cs.tol;
  }

  if (!accepted) return res;

  // tangent at the accepted point (fresh factorization at the solution)
  const auto trip = sys.jacobian_triplets(cur.u, cur.mu, cur.lam, cur.eta, released);
  Vec b;
  if (border)
    b = *border;
  else if (kernel.size() == n)
    b = kernel;
  else
    b = Vec();
  std::unique_ptr<BorderedSolver> slv;
  if (b.size() == n) {
    try {
      slv = std::make_unique<BorderedSolver>(m, n, trip, b);
    } catch (const SolveError&) {
      slv.reset();
    }
  }
  if (!slv) slv = detail::make_free_border(sys, x, released, trip, m, n);

  res.converged = true;
  res.chart = cur;
  res.chart.step_h = 0.0;
  res.tangent = slv->kernel();
  res.chart.tangent = res.tangent;
  res.chart.norm_f = nf;
  res.chart.norm_d = res.history.back().norm_d;
  res.chart.norm_U = cur.norm_U_value();
  return res;
}

/// Newton on a square augmented system (released-label count equal to the
/// rank deficit, no continuation direction): plain damped iteration with a
/// sparse LU solve per step. Used for re-correcting after a fixed parameter
/// is perturbed, where the solution point is isolated.
inline CorrectResult correct_pinned(const AugmentedSystem& sys, const Chart& start,
                                    const std::vector<Slot>& released,
                                    const CorrectorSettings& cs = {}) {
  const int n = sys.n_unknowns(released);
  if (sys.residual_dim() != n)
    throw ProblemError("pinned corrector: system is not square");

  CorrectResult res;
  res.chart = start;
  Chart cur = start;
  Vec x = sys.pack(start, released);
  Vec f = sys.residual(cur);
  double nf = f.norm();

  IterRecord r0;
  r0.iter = 0;
  r0.norm_f = nf;
  r0.norm_U = cur.norm_U_value();
  res.history.push_back(r0);

  bool accepted = nf <= cs.tol;
  for (int it = 1; it <= cs.max_iter && !accepted; ++it) {
    const auto trip = sys.jacobian_triplets(cur.u, cur.mu, cur.lam, cur.eta, released);
    SpMat J(n, n);
    J.setFromTriplets(trip.begin(), trip.end());
    J.makeCompressed();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(J);
    lu.factorize(J);
    if (lu.info() != Eigen::Success)
      throw SolveError("pinned corrector: singular Jacobian");
    const Vec d = lu.solve(Vec(-f));

    double gamma = 1.0;
    bool ok = false;
    Chart c_new = cur;
    Vec x_new, f_new;
    double nf_new = 0.0;
    for (int dmp = 0; dmp <= cs.max_damping; ++dmp) {
      x_new = x + gamma * d;
      try {
        sys.unpack(x_new, released, c_new);
        f_new = sys.residual(c_new);
        nf_new = f_new.norm();
        if (nf_new <= (1.0 - gamma / 4.0) * nf || nf <= cs.tol) {
          ok = true;
          break;
        }
      } catch (const EvalError&) {
      }
      gamma /= 2.0;
    }
    if (!ok) return res;

    x = x_new;
    cur = c_new;
    f = f_new;
    nf = nf_new;

    IterRecord rec;
    rec.iter = it;
    rec.gamma = gamma;
    rec.norm_d = (gamma * d).norm();
    rec.norm_f = nf;
    rec.norm_U = cur.norm_U_value();
    res.history.push_back(rec);
    accepted = nf <= cs.tol && rec.norm_d <= cs.tol;
  }

  if (!accepted) return res;
  res.converged = true;
  res.chart = cur;
  res.chart.step_h = 0.0;
  res.chart.norm_f = nf;
  res.chart.norm_d = res.history.back().norm_d;
  res.chart.norm_U = cur.norm_U_value();
  return res;
}

}  // namespace conadj
