#pragma once

// Bordered linear algebra on top of a sparse LU factorization. A square
// system [J; b^T] (J of size m x n with m = n-1, border row b) is factored
// once; its kernel direction and Newton corrections are then obtained from
// different right-hand sides of the same factorization.

#include "conadj/types.hpp"

#include <vector>

namespace conadj {

class BorderedSolver {
 public:
  /// Factor the (m+1) x n square matrix built from the triplets of J
  /// (m rows, n cols) with the border row b appended at the bottom.
  BorderedSolver(int m, int n, const std::vector<Triplet>& jac_trip, const Vec& b) {
    if (b.size() != n || m + 1 != n)
      throw SolveError("bordered solve: dimensions are not square after bordering");
    std::vector<Triplet> trip(jac_trip);
    trip.reserve(trip.size() + static_cast<size_t>(n));
    for (int k = 0; k < n; ++k)
      if (b[k] != 0.0) trip.emplace_back(m, k, b[k]);
    SpMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    lu_.compute(A);
    if (lu_.info() != Eigen::Success)
      throw SolveError("bordered solve: LU factorization failed (singular matrix?)");
    n_ = n;
  }

  int size() const { return n_; }

  Vec solve(const Vec& rhs) const {
    if (rhs.size() != n_) throw SolveError("bordered solve: rhs dimension mismatch");
    Vec x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success || !x.allFinite())
      throw SolveError("bordered solve: back-substitution failed");
    return x;
  }

  /// Unit kernel vector of J: solve with rhs = e_n (border row selects it).
  Vec kernel() const {
    Vec rhs = Vec::Zero(n_);
    rhs[n_ - 1] = 1.0;
    Vec t = solve(rhs);
    const double nrm = t.norm();
    if (nrm == 0.0) throw SolveError("bordered solve: zero kernel vector");
    return t / nrm;
  }

 private:
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  int n_ = 0;
};

}  // namespace conadj
