#pragma once

// Common scalar/matrix aliases and error types used across the library.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace conadj {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// A block evaluation produced NaN/Inf or had inconsistent dimensions.
struct EvalError : std::runtime_error {
  std::string block;
  EvalError(std::string blk, const std::string& msg)
      : std::runtime_error("block '" + blk + "': " + msg), block(std::move(blk)) {}
};

/// Misuse of the problem builder (duplicate names, bad indices, ...).
struct ProblemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Linear-algebra failure (singular system, wrong dimensions).
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Missing label / unknown block during persisted-run readback.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace conadj
