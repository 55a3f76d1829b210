// Full-resolution invariant-curve sweep (q = 377): branch values, fiber and
// spectral diagnostics, and the asymptotic-phase decay experiment, all on a
// single continuation run shared across the test cases.

#include "conadj/invariant_curve.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

using namespace conadj;

namespace {

struct FullRun {
  invc::CurveProblem cp;
  RunStore store;
};

const FullRun& full_run() {
  static FullRun fr = [] {
    auto root = std::filesystem::temp_directory_path() / "conadj-test-curve";
    std::filesystem::remove_all(root);
    std::filesystem::create_directories(root);
    auto cp = invc::build_curve_problem(377, 233);
    RunStore store = invc::run_curve_continuation(root, cp);
    return FullRun{std::move(cp), std::move(store)};
  }();
  return fr;
}

const Chart& chart_at_r2(const RunStore& store, const AugmentedSystem& sys, double r2) {
  for (const Chart& c : store.charts)
    if (std::abs(sys.value(c, "r2") - r2) < 1e-8) return c;
  throw std::runtime_error("no chart at r2 = " + std::to_string(r2));
}

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

}  // namespace

TEST_CASE("branch endpoints and the located event match the stored values") {
  const auto& [cp, store] = full_run();
  const AugmentedSystem& sys = cp.sys;

  // start of the sweep at r2 = 0 (exact circle)
  const Chart& c0 = store.charts.front();
  CHECK(c0.type_tag == "EP");
  CHECK(std::abs(sys.value(c0, "r2")) < 1e-10);
  CHECK(std::abs(sys.value(c0, "b")) < 1e-10);
  CHECK(rel(sys.value(c0, "e.r2"), -5.3757e-02) < 1e-3);
  CHECK(rel(sys.value(c0, "e.b"), -1.5916e-01) < 1e-3);

  // user event at r2 = -0.16
  const Chart& ca = chart_at_r2(store, sys, -0.16);
  CHECK(ca.type_tag == "A");
  CHECK(rel(sys.value(ca, "b"), 4.8149e-02) < 1e-3);
  CHECK(rel(sys.value(ca, "e.r2"), -5.4033e-02) < 1e-3);
  CHECK(rel(sys.value(ca, "e.b"), -1.9790e-01) < 1e-3);

  // slope of the branch in the (r2, b) plane at the event
  CHECK(-sys.value(ca, "e.r2") / sys.value(ca, "e.b") ==
        Catch::Approx(-0.273).margin(2e-3));

  // terminal endpoint at r2 = -0.9
  const Chart& ce = store.charts.back();
  CHECK(ce.type_tag == "EP");
  CHECK(std::abs(sys.value(ce, "r2") + 0.9) < 1e-8);
  CHECK(rel(sys.value(ce, "b"), 1.8498e-01) < 1e-3);
  CHECK(rel(sys.value(ce, "e.r2"), -7.5930e-02) < 1e-3);
  CHECK(rel(sys.value(ce, "e.b"), -9.2511e-01) < 1e-3);

  // the rotation offset is pinned to zero along the whole family
  for (const Chart& c : store.charts) {
    CHECK(std::abs(sys.value(c, "drho")) < 1e-10);
    CHECK(sys.value(c, "e.drho") == Catch::Approx(1.0).margin(1e-10));
    CHECK(c.norm_f <= 1e-6);
  }
}

TEST_CASE("slope of the continuation branch matches the sensitivity ratio") {
  const auto& [cp, store] = full_run();
  const AugmentedSystem& sys = cp.sys;
  const Chart& ca = chart_at_r2(store, sys, -0.16);

  // secant slope db/dr2 from the neighboring charts brackets the adjoint
  // prediction -e.r2/e.b
  const Chart* lo = nullptr;
  const Chart* hi = nullptr;
  for (const Chart& c : store.charts) {
    const double r2 = sys.value(c, "r2");
    if (r2 < -0.16 && (!lo || r2 > sys.value(*lo, "r2"))) lo = &c;
    if (r2 > -0.16 && (!hi || r2 < sys.value(*hi, "r2"))) hi = &c;
  }
  REQUIRE(lo);
  REQUIRE(hi);
  const double secant = (sys.value(*hi, "b") - sys.value(*lo, "b")) /
                        (sys.value(*hi, "r2") - sys.value(*lo, "r2"));
  const double predicted = -sys.value(ca, "e.r2") / sys.value(ca, "e.b");
  // the neighboring charts are up to 0.5 apart in arclength, so the secant
  // only coarsely samples the curved branch
  CHECK(rel(predicted, secant) < 0.1);
}

TEST_CASE("transversal stability radius along the branch") {
  const auto& [cp, store] = full_run();
  const AugmentedSystem& sys = cp.sys;

  for (double r2 : {0.0, -0.16, -0.9}) {
    auto cs = invc::extract_state(cp, chart_at_r2(store, sys, r2));
    Mat qphi = invc::q_phi_limit(cp.map, cs);
    const double radius = invc::gamma_hat_radius(cp.map, cs, qphi);
    INFO("r2 = " << r2);
    CHECK(radius < 1.0);
    if (r2 == 0.0) CHECK(radius == Catch::Approx(0.5).margin(1e-3));
  }
}

TEST_CASE("fiber tangents at the event point: limit and adjoint routes") {
  const auto& [cp, store] = full_run();
  auto cs = invc::extract_state(cp, chart_at_r2(store, cp.sys, -0.16));

  Mat qphi = invc::q_phi_limit(cp.map, cs);
  Mat qadj = invc::fiber_from_adjoint(cs);
  CHECK((qphi - qadj).cwiseAbs().maxCoeff() <= 1e-3 * qphi.cwiseAbs().maxCoeff());

  // normalization and the shift relation at full resolution
  Mat vp = invc::discrete_tangent(cs);
  for (int i = 0; i < cs.q; ++i) {
    CHECK(qphi.col(i).dot(vp.col(i)) == Catch::Approx(1.0).margin(1e-10));
    const int ip = (i + cs.p) % cs.q;
    const Vec2 lhs = cp.map.dMx(cs.v.col(i), cs.r2, cs.b).transpose() * qphi.col(ip);
    // holds up to the O(1/q^2) accuracy of the tangent used to normalize
    CHECK((lhs - qphi.col(i)).norm() < 1e-4);
  }
  CHECK(std::abs(cs.lam_ps) < 1e-8);
}

TEST_CASE("asymptotic-phase decay for twenty perturbed starts at the event") {
  const auto& [cp, store] = full_run();
  auto cs = invc::extract_state(cp, chart_at_r2(store, cp.sys, -0.16));
  Mat qphi = invc::q_phi_limit(cp.map, cs);

  for (int trial = 0; trial < 20; ++trial) {
    const double ang = 2 * M_PI * trial / 20.0;
    const Vec2 delta0 = 1e-4 * Vec2(std::cos(ang), std::sin(ang));
    const int i0 = (trial * 37) % cs.q;
    auto gap = invc::phase_decay_experiment(cp.map, cs, qphi, i0, delta0, 200);
    double plateau = 1e99;
    for (double g : gap) plateau = std::min(plateau, g);
    INFO("trial " << trial << " node " << i0);
    // the initial gap is the transversal part of the perturbation
    CHECK(gap.front() <= 1e-2);
    CHECK(plateau <= 1e-6);
    CHECK(gap.back() <= 1e-6);
  }
}
