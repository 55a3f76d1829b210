#pragma once

// Hybrid-system sensitivities: the zero-time discontinuity mapping at a
// transversal event-surface crossing (saltation), the two-segment hybrid
// monodromy composition, and the sensitivity of the period of a hybrid
// limit cycle to the system parameters.

#include "conadj/flow.hpp"

#include <cmath>

namespace conadj {

struct JumpMap {
  std::function<Vec(const Vec&, const Vec&)> g;
  std::function<Mat(const Vec&, const Vec&)> gx;
  std::function<Mat(const Vec&, const Vec&)> gp;
};

struct HybridJunction {
  VectorField f1;
  VectorField f2;
  JumpMap g;
  Section h_es;
  Vec x0;  // junction point on the event surface
  Vec p0;
};

struct Saltation {
  Mat dxD;     // linearization of the zero-time discontinuity mapping in x
  Mat dpD;     // and in p
  Vec lam_es;  // multiplier column scaling the event-surface gradient row
};

inline Saltation saltation(const HybridJunction& j) {
  if (std::abs(j.h_es.h(j.x0, j.p0)) > 1e-8)
    throw ProblemError("saltation: junction point is not on the event surface");
  const Vec f1 = j.f1.f(j.x0, j.p0);
  const RowVec hx = j.h_es.hx(j.x0, j.p0);
  const RowVec hp = j.h_es.hp(j.x0, j.p0);
  const double lie = hx.dot(f1);
  if (std::abs(lie) < 1e-10)
    throw SolveError("saltation: trajectory tangent to the event surface");

  const Vec gx0 = j.g.g(j.x0, j.p0);
  const Mat gx = j.g.gx(j.x0, j.p0);
  const Vec f2 = j.f2.f(gx0, j.p0);

  Saltation out;
  out.lam_es = (f2 - gx * f1) / lie;
  out.dxD = gx + out.lam_es * hx;
  out.dpD = j.g.gp(j.x0, j.p0) + out.lam_es * hp;
  return out;
}

struct HybridMonodromy {
  Mat G_x;  // X2 dxD X1
  Mat G_p;  // X2 dxD P1 + X2 dpD + P2
  Vec f_start;
};

/// Monodromy of a two-segment hybrid periodic orbit: seg1 runs from the
/// anchor point to the event surface (duration sigma), the jump moves its
/// endpoint to the start of seg2, and seg2 runs the remaining T - sigma
/// back to the anchor. The junction is evaluated at seg1's endpoint.
inline HybridMonodromy hybrid_monodromy(const Segment& seg1, const HybridJunction& j,
                                        const Segment& seg2) {
  SegmentSensitivity s1 = segment_sensitivities(seg1);
  SegmentSensitivity s2 = segment_sensitivities(seg2);
  Saltation sal = saltation(j);

  HybridMonodromy out;
  out.G_x = s2.X1 * sal.dxD * s1.X1;
  out.G_p = s2.X1 * sal.dxD * s1.P1 + s2.X1 * sal.dpD + s2.P1;
  out.f_start = seg1.field.f(seg1.x0, seg1.p);
  return out;
}

/// Sensitivity of the hybrid period to the parameters: with the left
/// eigenvector of G_x at eigenvalue 1 normalized lam_po^T f(anchor) = 1,
/// the complementary parameters are eta_p^T = lam_po^T G_p and the period
/// sensitivities are their negatives.
inline RowVec hybrid_period_sensitivity(const HybridMonodromy& m) {
  RowVec w = periodic_left_eigenvector(m.G_x, m.f_start);  // w^T f = -1
  const RowVec lam_po = -w;                                // lam^T f = +1
  return -(lam_po * m.G_p);
}

}  // namespace conadj
