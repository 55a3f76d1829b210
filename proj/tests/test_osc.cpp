#include "conadj/osc.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>

using namespace conadj;

namespace {

std::filesystem::path temp_root() {
  auto p = std::filesystem::temp_directory_path() / "conadj-test-osc";
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

double find_ep_value(const RunStore& store, const AugmentedSystem& sys,
                     const std::string& at_label, double at_value,
                     const std::string& want_label) {
  for (const Chart& c : store.charts)
    if (c.type_tag == "EP" && std::abs(sys.value(c, at_label) - at_value) < 1e-6)
      return sys.value(c, want_label);
  throw std::runtime_error("no EP at " + at_label + " = " + std::to_string(at_value));
}

}  // namespace

TEST_CASE("inflection frequencies solve the sextic") {
  // the sextic gives the zero-offset limit of the inflection frequencies
  auto [w_lo, w_hi] = osc::inflection_frequencies(0.1);
  CHECK(w_lo == Catch::Approx(0.92043919).margin(2e-4));
  CHECK(w_hi == Catch::Approx(1.06205837).margin(2e-4));
  CHECK(std::abs(osc::inflection_residual(w_lo, 0.1)) < 1e-10);
  CHECK(std::abs(osc::inflection_residual(w_hi, 0.1)) < 1e-10);

  // at the finite offset ep = 0.01 the zeros of the closed-form sensitivity
  // shift slightly; they are the frozen fold locations of the second sweep
  auto dslope = [](double w) {
    return fd_richardson([](double x) { return osc::delta_closed_form(x, 0.01, 0.1); },
                         w, 1e-5);
  };
  auto bisect_zero = [&](double lo, double hi) {
    double flo = dslope(lo);
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((dslope(mid) > 0) == (flo > 0)) { lo = mid; flo = dslope(mid); }
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  CHECK(bisect_zero(0.8, 1.0) == Catch::Approx(0.92043919).margin(1e-7));
  CHECK(bisect_zero(1.0, 1.2) == Catch::Approx(1.06205837).margin(1e-7));

  // the sextic is where the closed-form sensitivity changes sign
  const double before = fd_richardson(
      [](double w) { return osc::delta_closed_form(w, 0.01, 0.1); }, w_hi - 1e-3, 1e-5);
  const double after = fd_richardson(
      [](double w) { return osc::delta_closed_form(w, 0.01, 0.1); }, w_hi + 1e-3, 1e-5);
  CHECK((before > 0) != (after > 0));
}

TEST_CASE("first sweep drives the adjoint normalization across [0, 1]") {
  auto root = temp_root();
  RunStore store = osc::run_first(root);
  AugmentedSystem sys = osc::build_problem(osc::default_u0());

  // labels strictly increasing
  for (size_t k = 1; k < store.charts.size(); ++k)
    CHECK(store.charts[k].label > store.charts[k - 1].label);

  // one direction is skipped (start sits at the e.da = 0 boundary), so the
  // run starts with exactly one EP at e.da = 0 and ends at e.da = 1
  REQUIRE(store.charts.size() >= 2);
  CHECK(store.charts.front().type_tag == "EP");
  CHECK(sys.value(store.charts.front(), "e.da") == Catch::Approx(0.0).margin(1e-8));
  const Chart& last = store.charts.back();
  CHECK(last.type_tag == "EP");
  CHECK(sys.value(last, "e.da") == Catch::Approx(1.0).margin(1e-8));

  // all charts stay inside the window and da stays at the solution value
  for (const Chart& c : store.charts) {
    const double eda = sys.value(c, "e.da");
    CHECK(eda >= -1e-8);
    CHECK(eda <= 1.0 + 1e-8);
    CHECK(sys.value(c, "da") == Catch::Approx(-7.3832e-02).margin(1e-6));
    CHECK(c.norm_f <= 1e-6);
  }

  // endpoint sensitivities at the eta_da = 1 normalization
  CHECK(sys.value(last, "e.av") == Catch::Approx(4.6833).margin(1e-3));
  CHECK(sys.value(last, "e.ep") == Catch::Approx(7.3416).margin(1e-3));
  CHECK(sys.value(last, "e.ze") == Catch::Approx(-1.2213).margin(1e-3));

  // the endpoint agrees with the direct adjoint solve to much higher accuracy
  Chart c = last;
  Chart adj = solve_adjoint_direct(sys, c, {"e.da"});
  CHECK((adj.lam - last.lam).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((adj.eta - last.eta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("released-coordinate spacing stays within [0.3h, 1.7h]") {
  AugmentedSystem sys = osc::build_problem(osc::default_u0());
  ActiveSet act;
  act.released = {"da", "e.da", "e.av", "e.ep", "e.ze"};
  act.windows["e.da"] = {0.0, 1.0};
  ContinuationSettings cfg;
  cfg.npr = 1;  // store every accepted chart
  RunStore store = Continuation(sys, act, cfg).run(sys.initial_chart());
  REQUIRE(store.charts.size() >= 3);
  int checked = 0;
  for (size_t k = 1; k < store.charts.size(); ++k) {
    const Chart& a = store.charts[k - 1];
    const Chart& b = store.charts[k];
    // only plain-to-plain pairs: localized event charts sit mid-step
    if (a.type_tag != "plain" || b.type_tag != "plain" || b.step_h == 0.0) continue;
    double d2 = 0.0;
    for (const auto& lbl : act.released) {
      const double dv = sys.value(b, lbl) - sys.value(a, lbl);
      d2 += dv * dv;
    }
    const double spacing = std::sqrt(d2);
    CHECK(spacing >= 0.3 * b.step_h);
    CHECK(spacing <= 1.7 * b.step_h);
    ++checked;
  }
  CHECK(checked >= 1);
}

TEST_CASE("second sweep restarts from disk and finds both inflection folds") {
  auto root = temp_root();
  osc::run_first(root);
  RunStore store = osc::run_second(root);
  AugmentedSystem sys = osc::build_problem(osc::default_u0());

  // the interior start is emitted as EP in both directions
  int start_eps = 0;
  for (const Chart& c : store.charts)
    if (c.type_tag == "EP" &&
        std::abs(sys.value(c, "av") - 1.005) < 1e-9)
      ++start_eps;
  CHECK(start_eps == 2);

  // endpoints of the av window
  CHECK(find_ep_value(store, sys, "av", 2.5, "da") ==
        Catch::Approx(-1.7965e-03).margin(1e-5));
  CHECK(find_ep_value(store, sys, "av", 0.5, "da") ==
        Catch::Approx(1.6854e-02).margin(1e-4));

  // fold points sit at the inflection frequencies with vanishing sensitivity
  auto [w_lo, w_hi] = osc::inflection_frequencies(0.1);
  std::vector<double> fp_av;
  for (const Chart& c : store.charts)
    if (c.type_tag == "FP") {
      fp_av.push_back(sys.value(c, "av"));
      CHECK(std::abs(sys.value(c, "e.av")) <= 1e-5);
    }
  REQUIRE(fp_av.size() == 2);
  std::sort(fp_av.begin(), fp_av.end());
  CHECK(fp_av[0] == Catch::Approx(0.92043919).margin(1e-4));
  CHECK(fp_av[1] == Catch::Approx(1.06205837).margin(1e-4));

  // each fold is bracketed by non-event neighbors
  for (size_t k = 0; k < store.charts.size(); ++k) {
    if (store.charts[k].type_tag != "FP") continue;
    REQUIRE(k > 0);
    REQUIRE(k + 1 < store.charts.size());
    CHECK(store.charts[k - 1].type_tag != "FP");
    CHECK(store.charts[k + 1].type_tag != "FP");
  }
}
