#include "conadj/adjoint.hpp"
#include "conadj/newton.hpp"
#include "conadj/osc.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace conadj;

TEST_CASE("corrector converges on the oscillator problem in few iterations") {
  AugmentedSystem sys = osc::build_problem(osc::default_u0());
  auto released = sys.resolve({"da", "e.da", "e.av", "e.ep", "e.ze"});
  CorrectResult cr = correct(sys, sys.initial_chart(), released);
  REQUIRE(cr.converged);
  CHECK(cr.history.size() - 1 <= 4);

  // residual norms decrease monotonically from the frozen initial value
  CHECK(cr.history.front().norm_f == Catch::Approx(0.240).margin(5e-4));
  for (size_t k = 1; k < cr.history.size(); ++k)
    CHECK(cr.history[k].norm_f < cr.history[k - 1].norm_f);
  CHECK(cr.chart.norm_f <= 1e-6);

  // the corrected amplitude difference matches the closed-form value
  const double da = sys.value(cr.chart, "da");
  CHECK(da == Catch::Approx(-7.3832e-02).margin(5e-7));
  CHECK(da == Catch::Approx(osc::delta_closed_form(1.005, 0.01, 0.1)).margin(1e-10));

  // fixed parameters are untouched by the corrector
  CHECK(sys.value(cr.chart, "av") == 1.005);
  CHECK(sys.value(cr.chart, "ep") == 0.01);
  CHECK(sys.value(cr.chart, "ze") == 0.1);

  // the tangent is unit and lies in the kernel of the Jacobian
  CHECK(cr.tangent.norm() == Catch::Approx(1.0).epsilon(1e-12));
  auto trip = sys.jacobian_triplets(cr.chart.u, cr.chart.mu, cr.chart.lam,
                                    cr.chart.eta, released);
  SpMat J(sys.residual_dim(), sys.n_unknowns(released));
  J.setFromTriplets(trip.begin(), trip.end());
  CHECK((J * cr.tangent).norm() < 1e-9);
}

TEST_CASE("corrector accepts a converged start without iterating") {
  AugmentedSystem sys = osc::build_problem(osc::default_u0());
  auto released = sys.resolve({"da", "e.da", "e.av", "e.ep", "e.ze"});
  CorrectResult cr = correct(sys, sys.initial_chart(), released);
  REQUIRE(cr.converged);
  CorrectResult cr2 = correct(sys, cr.chart, released);
  REQUIRE(cr2.converged);
  CHECK(cr2.history.size() == 1);  // only the iteration-0 record
}

TEST_CASE("direct adjoint solve reproduces the closed-form sensitivities") {
  AugmentedSystem sys = osc::build_problem(osc::default_u0());
  auto released = sys.resolve({"da", "e.da", "e.av", "e.ep", "e.ze"});
  CorrectResult cr = correct(sys, sys.initial_chart(), released);
  REQUIRE(cr.converged);

  Chart c = cr.chart;
  c.eta[sys.slot("e.da").index] = 1.0;
  Chart adj = solve_adjoint_direct(sys, c, {"e.da"});

  // adjoint conditions hold at the solution
  Vec r = sys.residual(adj).segment(11, 10);
  CHECK(r.cwiseAbs().maxCoeff() < 1e-8);

  // with eta_da = 1, the remaining complementary parameters are minus the
  // sensitivities of da to the other continuation parameters; compare with
  // Richardson-extrapolated derivatives of the closed form
  auto dd = [](const std::function<double(double)>& fn, double x) {
    return fd_richardson(fn, x, 1e-4);
  };
  const double e_av =
      dd([](double w) { return osc::delta_closed_form(w, 0.01, 0.1); }, 1.005);
  const double e_ep =
      dd([](double e) { return osc::delta_closed_form(1.005, e, 0.1); }, 0.01);
  const double e_ze =
      dd([](double z) { return osc::delta_closed_form(1.005, 0.01, z); }, 0.1);
  CHECK(sys.value(adj, "e.av") == Catch::Approx(-e_av).margin(1e-8));
  CHECK(sys.value(adj, "e.ep") == Catch::Approx(-e_ep).margin(1e-8));
  CHECK(sys.value(adj, "e.ze") == Catch::Approx(-e_ze).margin(1e-8));

  // frozen endpoint values of the first sweep (eta_da = 1 normalization)
  CHECK(sys.value(adj, "e.av") == Catch::Approx(4.6833).margin(5e-4));
  CHECK(sys.value(adj, "e.ep") == Catch::Approx(7.3416).margin(5e-4));
  CHECK(sys.value(adj, "e.ze") == Catch::Approx(-1.2213).margin(5e-4));

  // lambda_fr equals eta_ep (last adjoint condition)
  Vec lam_phi = sys.block_adjoint(adj, "phi");
  CHECK(lam_phi[2] == Catch::Approx(sys.value(adj, "e.ep")).margin(1e-10));

  // 2 c1 lambda_am1 + eta_da = 0 (first adjoint condition)
  const double c1 = adj.u[2];
  CHECK(2 * c1 * lam_phi[0] + 1.0 == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("direct adjoint solve rejects an unbalanced selection") {
  AugmentedSystem sys = osc::build_problem(osc::default_u0());
  Chart c = sys.initial_chart();
  CHECK_THROWS_AS(solve_adjoint_direct(sys, c, {"e.da", "e.av"}), ProblemError);
  CHECK_THROWS_AS(solve_adjoint_direct(sys, c, std::vector<std::string>{}), ProblemError);
  CHECK_THROWS_AS(solve_adjoint_direct(sys, c, {"da"}), ProblemError);
}
