#pragma once

// Central finite-difference helpers. The step rule h = cbrt(eps)*max(1,|s|)
// is used everywhere a derivative is approximated numerically.

#include "conadj/types.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace conadj {

using EvalFn = std::function<Vec(const Vec&)>;
using JacFn = std::function<Mat(const Vec&)>;

inline double fd_step(double scale) {
  static const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  return h0 * std::max(1.0, std::abs(scale));
}

/// Central-difference Jacobian of fn at u, one column per component of u.
inline Mat fd_jacobian(const EvalFn& fn, const Vec& u) {
  const Vec f0 = fn(u);
  Mat J(f0.size(), u.size());
  Vec up = u, dn = u;
  for (int k = 0; k < u.size(); ++k) {
    const double h = fd_step(u[k]);
    up[k] = u[k] + h;
    dn[k] = u[k] - h;
    J.col(k) = (fn(up) - fn(dn)) / (2.0 * h);
    up[k] = u[k];
    dn[k] = u[k];
  }
  return J;
}

/// Central-difference derivative of a scalar-valued function.
inline double fd_derivative(const std::function<double(double)>& fn, double x,
                            double h) {
  return (fn(x + h) - fn(x - h)) / (2.0 * h);
}

/// Richardson-extrapolated central difference: combines steps h and h/2 to
/// cancel the leading O(h^2) error term.
inline double fd_richardson(const std::function<double(double)>& fn, double x,
                            double h) {
  const double d1 = fd_derivative(fn, x, h);
  const double d2 = fd_derivative(fn, x, h / 2.0);
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace conadj
