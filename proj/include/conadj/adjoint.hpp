#pragma once

// Direct computation of the adjoint variables at a fixed primal solution.
// With u held fixed, the adjoint conditions
//
//   (DPhi(u))^T lambda + (DPsi(u))^T eta = 0
//
// are linear in (lambda, eta). Selecting k complementary parameters whose
// eta values are prescribed (typically a normalization such as eta_j = 1)
// leaves a square system in the remaining lambda and eta components when
// n_lambda + (n_eta - k) equals n_u.

#include "conadj/linear.hpp"
#include "conadj/problem.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace conadj {

/// Solve the adjoint conditions at chart.u for all lambda and all eta not
/// listed in `fixed_eta_labels`; the listed components keep the values they
/// have in `chart.eta`. Returns a chart with updated lam/eta.
inline Chart solve_adjoint_direct(const AugmentedSystem& sys, const Chart& chart,
                                  const std::vector<std::string>& fixed_eta_labels) {
  if (!sys.has_adjoint())
    throw ProblemError("solve_adjoint_direct: the problem has no adjoint blocks");

  std::vector<bool> fixed(static_cast<size_t>(sys.n_eta()), false);
  for (const auto& lbl : fixed_eta_labels) {
    const Slot s = sys.slot(lbl);
    if (s.kind != Slot::Eta)
      throw ProblemError("solve_adjoint_direct: '" + lbl +
                         "' is not a complementary parameter");
    fixed[static_cast<size_t>(s.index)] = true;
  }

  // unknown columns: all lambda, then free eta in index order
  std::vector<int> eta_col(static_cast<size_t>(sys.n_eta()), -1);
  int ncol = sys.n_lambda();
  for (int k = 0; k < sys.n_eta(); ++k)
    if (!fixed[static_cast<size_t>(k)]) eta_col[static_cast<size_t>(k)] = ncol++;
  if (ncol != sys.n_u())
    throw ProblemError(
        "solve_adjoint_direct: free adjoint count does not match the number of "
        "adjoint conditions");

  std::vector<Triplet> trip;
  Vec rhs = Vec::Zero(sys.n_u());
  for (const Block& bl : sys.blocks()) {
    if (!bl.has_adjoint) continue;
    const Mat J = bl.jac_at(bl.gather(chart.u));
    for (int r = 0; r < bl.dim_out; ++r) {
      if (bl.kind == BlockKind::Monitor && fixed[static_cast<size_t>(bl.adj_offset + r)]) {
        const double v = chart.eta[bl.adj_offset + r];
        if (v != 0.0)
          for (size_t k = 0; k < bl.uidx.size(); ++k)
            rhs[bl.uidx[k]] -= v * J(r, static_cast<Eigen::Index>(k));
        continue;
      }
      const int col = (bl.kind == BlockKind::Zero) ? bl.adj_offset + r
                                                   : eta_col[static_cast<size_t>(
                                                         bl.adj_offset + r)];
      for (size_t k = 0; k < bl.uidx.size(); ++k)
        if (J(r, static_cast<Eigen::Index>(k)) != 0.0)
          trip.emplace_back(bl.uidx[k], col, J(r, static_cast<Eigen::Index>(k)));
    }
  }

  SpMat A(sys.n_u(), sys.n_u());
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw SolveError("solve_adjoint_direct: adjoint system is singular");
  Vec x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite())
    throw SolveError("solve_adjoint_direct: back-substitution failed");

  Chart out = chart;
  out.lam = x.head(sys.n_lambda());
  for (int k = 0; k < sys.n_eta(); ++k)
    if (!fixed[static_cast<size_t>(k)]) out.eta[k] = x[eta_col[static_cast<size_t>(k)]];
  return out;
}

}  // namespace conadj
