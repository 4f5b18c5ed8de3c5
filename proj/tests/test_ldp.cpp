#include <cmath>

#include "doctest.h"
#include "logsde/coeffs.hpp"
#include "logsde/ldp.hpp"

using namespace logsde;

namespace {

CoefficientField constant_field(int d, int m, double b, double sigma0) {
  nlohmann::json params{{"d", d}, {"m", m}, {"b", b}, {"sigma0", sigma0}};
  return make_field("constant", params);
}

// Survival function of the standard normal.
double normal_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// One-sided running-max law for Brownian motion by the reflection principle:
// P(sup_{t<=1} sqrt(eps) W(t) >= a) = 2 Phi_bar(a / sqrt(eps)).
double sup_level_prob(double eps, double a) { return 2.0 * normal_tail(a / std::sqrt(eps)); }

}  // namespace

TEST_CASE("events evaluate from trajectory nodes") {
  Trajectory traj;
  traj.grid = TimeGrid(1.0, 2);
  traj.dim = 1;
  traj.states = {0.0, 0.8, 0.5};
  const std::vector<double> x0{0.0};

  CHECK(PathEvent::terminal({0.5}, 1e-6).evaluate(traj, x0));
  CHECK(!PathEvent::terminal({0.8}, 1e-6).evaluate(traj, x0));
  CHECK(PathEvent::exit(0.7).evaluate(traj, x0));
  CHECK(!PathEvent::exit(0.9).evaluate(traj, x0));
  CHECK(PathEvent::level(0.8).evaluate(traj, x0));
  CHECK(!PathEvent::level(0.81).evaluate(traj, x0));

  GridPath center(TimeGrid(1.0, 1), 1);
  CHECK(PathEvent::tube_event(center, 0.85).evaluate(traj, x0));
  CHECK(!PathEvent::tube_event(center, 0.75).evaluate(traj, x0));
}

TEST_CASE("rate of a target already at the start is zero") {
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  const RateResult r = rate_functional(field, PathEvent::terminal({0.0}), std::vector<double>{0.0},
                                       16, 2, 7);
  CHECK(r.status == RateResult::Status::ok);
  CHECK(r.rate == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.residual <= 1e-5);
}

TEST_CASE("unit terminal hit costs one half") {
  // cheapest control: the straight line g(t) = t, energy 1
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  const RateResult r = rate_functional(field, PathEvent::terminal({1.0}), std::vector<double>{0.0},
                                       32, 2, 7);
  CHECK(r.status == RateResult::Status::ok);
  CHECK(std::abs(r.rate - 0.5) <= 1e-3);
  // the minimizer is close to the straight line
  for (int k = 0; k <= 32; ++k)
    CHECK(r.minimizer.knot(k)[0] ==
          doctest::Approx(r.minimizer.grid.node(k)).epsilon(0.05).scale(1.0));
}

TEST_CASE("doubling the diffusion scales the rate by a quarter") {
  const CoefficientField field = constant_field(1, 1, 0.0, 2.0);
  const RateResult r = rate_functional(field, PathEvent::terminal({1.0}), std::vector<double>{0.0},
                                       32, 2, 7);
  CHECK(r.status == RateResult::Status::ok);
  CHECK(std::abs(r.rate - 0.125) <= 1e-3);
}

TEST_CASE("level events price like terminal hits for driftless fields") {
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  const RateResult r = rate_functional(field, PathEvent::level(1.0), std::vector<double>{0.0},
                                       32, 2, 7);
  CHECK(r.status == RateResult::Status::ok);
  CHECK(std::abs(r.rate - 0.5) <= 1e-3);
}

TEST_CASE("exit-ball rates grow with the radius") {
  // The minimizer witnesses an upper bound, so the rate sits at or above the
  // straight-line cost R^2/2 and stays close to it at this knot resolution.
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  double prev = -1.0;
  for (double radius : {0.5, 1.0, 2.0}) {
    const RateResult r = rate_functional(field, PathEvent::exit(radius),
                                         std::vector<double>{0.0}, 32, 2, 7);
    CHECK(r.status == RateResult::Status::ok);
    CHECK(r.rate >= 0.5 * radius * radius - 1e-3);
    CHECK(r.rate <= 0.5 * radius * radius * 1.02 + 1e-3);
    CHECK(r.rate > prev);
    prev = r.rate;
  }
}

TEST_CASE("doubling the knots does not raise the rate") {
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    const double target = 0.4 + 0.2 * i;
    const RateResult coarse = rate_functional(field, PathEvent::terminal({target}),
                                              std::vector<double>{0.0}, 16, 2, 11);
    const RateResult fine = rate_functional(field, PathEvent::terminal({target}),
                                            std::vector<double>{0.0}, 32, 2, 11);
    CHECK(fine.rate <= coarse.rate + 1e-3);
  }
  const SineSeriesField sine(100, 1.0);
  for (int i = 0; i < 5; ++i) {
    const double target = 0.3 + 0.1 * i;
    const RateResult coarse = rate_functional(sine.field(), PathEvent::terminal({target, 0.1}),
                                              std::vector<double>{0.0, 0.0}, 16, 2, 11);
    const RateResult fine = rate_functional(sine.field(), PathEvent::terminal({target, 0.1}),
                                            std::vector<double>{0.0, 0.0}, 32, 2, 11);
    CHECK(fine.rate <= coarse.rate + 1e-3);
  }
}

TEST_CASE("the optimizer handles state-dependent diffusion") {
  // Exercises the sigma-Jacobian branch of the adjoint: sigma(x) = 1 + 0.2 tanh(x).
  auto drift = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  auto diffusion = [](std::span<const double> x, std::span<double> out) {
    out[0] = 1.0 + 0.2 * std::tanh(x[0]);
  };
  const CoefficientField field(1, 1, drift, diffusion, ModulusClass::custom, {},
                               FieldBounds{0.0, 1.2});
  const RateResult coarse = rate_functional(field, PathEvent::terminal({1.0}),
                                            std::vector<double>{0.0}, 16, 3, 21);
  const RateResult fine = rate_functional(field, PathEvent::terminal({1.0}),
                                          std::vector<double>{0.0}, 32, 3, 21);
  CHECK(coarse.status == RateResult::Status::ok);
  CHECK(fine.status == RateResult::Status::ok);
  CHECK(fine.rate <= coarse.rate + 1e-3);
  // sigma >= 1 along the way, so the cost sits below the sigma = 1 value
  CHECK(fine.rate < 0.5);
  // and above the cost with the largest sigma the path can see
  CHECK(fine.rate > 0.5 / (1.2 * 1.2) - 1e-3);
}

TEST_CASE("rates localize to the truncated field") {
  // events confined to a ball see identical coefficients, so identical rates
  const SineSeriesField sine(200, 1.0);
  const CoefficientField trunc = truncate_field(sine.field(), 5.0, 256);
  const PathEvent event = PathEvent::terminal({0.4, 0.2});
  const std::vector<double> x0{0.0, 0.0};
  const RateResult a = rate_functional(sine.field(), event, x0, 24, 2, 13);
  const RateResult b = rate_functional(trunc, event, x0, 24, 2, 13);
  CHECK(a.status == RateResult::Status::ok);
  CHECK(std::abs(a.rate - b.rate) <= 1e-8);
}

TEST_CASE("monte carlo log-probability basics") {
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  SUBCASE("the whole space is certain") {
    GridPath center(TimeGrid(1.0, 1), 1);
    const PathEvent certain = PathEvent::tube_event(center, 1e9);
    const McLogProb mc =
        mc_log_prob(field, 0.5, certain, std::vector<double>{0.0}, 2000, 64, 3);
    CHECK(mc.p_hat == 1.0);
    CHECK(mc.eps_log_p == 0.0);
    CHECK(mc.degenerate);
  }
  SUBCASE("trial floors are enforced") {
    const PathEvent e = PathEvent::level(1.0);
    CHECK_THROWS_AS(mc_log_prob(field, 0.5, e, std::vector<double>{0.0}, 10, 64, 3),
                    validation_error);
  }
  SUBCASE("level exceedance matches the reflection oracle") {
    const PathEvent e = PathEvent::level(1.0);
    const double eps = 0.2;
    const McLogProb mc = mc_log_prob(field, eps, e, std::vector<double>{0.0}, 20000, 4096, 3);
    const double truth = sup_level_prob(eps, 1.0);  // about 0.02535
    const double se = std::sqrt(truth * (1.0 - truth) / 20000.0);
    CHECK(std::abs(mc.p_hat - truth) <= 3.0 * se);
    CHECK(mc.lo < mc.eps_log_p);
    CHECK(mc.eps_log_p < mc.hi);
  }
  SUBCASE("impossible events are flagged below resolution") {
    const PathEvent e = PathEvent::level(50.0);
    const McLogProb mc = mc_log_prob(field, 0.01, e, std::vector<double>{0.0}, 1000, 64, 3);
    CHECK(mc.hits == 0);
    CHECK(mc.below_resolution);
    CHECK(std::isfinite(mc.hi));  // the upper band survives
  }
}

TEST_CASE("monte carlo estimates are reproducible and thread-invariant") {
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  const PathEvent e = PathEvent::level(0.8);
  const McLogProb a = mc_log_prob(field, 0.3, e, std::vector<double>{0.0}, 5000, 256, 17, 1);
  const McLogProb b = mc_log_prob(field, 0.3, e, std::vector<double>{0.0}, 5000, 256, 17, 4);
  CHECK(a.hits == b.hits);
  CHECK(a.p_hat == b.p_hat);
}

TEST_CASE("gap report shrinks down the ladder") {
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  const PathEvent e = PathEvent::level(1.0);
  const std::vector<double> ladder{0.4, 0.2, 0.1};
  const LdpReport report =
      ldp_gap_report(field, e, std::vector<double>{0.0}, ladder, 20000, 2048, 32, 2, 19);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.gaps_shrinking);
  CHECK(report.rate.rate == doctest::Approx(0.5).epsilon(2e-3));
  // oracle gaps: eps log(2 Phi_bar(1/sqrt(eps))) + 1/2, shrinking toward 0
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double oracle_gap = ladder[i] * std::log(sup_level_prob(ladder[i], 1.0)) + 0.5;
    CHECK(report.rows[i].gap == doctest::Approx(oracle_gap).epsilon(0.25));
  }
}

TEST_CASE("gap report of a certain event is all zeros") {
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  GridPath center(TimeGrid(1.0, 1), 1);
  const PathEvent certain = PathEvent::tube_event(center, 1e9);
  const std::vector<double> ladder{0.4, 0.2};
  const LdpReport report =
      ldp_gap_report(field, certain, std::vector<double>{0.0}, ladder, 1000, 64, 8, 1, 3);
  for (const auto& row : report.rows) {
    CHECK(row.p_hat == 1.0);
    CHECK(row.eps_log_p == 0.0);
    CHECK(row.gap == 0.0);
  }
  CHECK(report.rate.rate == 0.0);
  CHECK(report.gaps_shrinking);
}

TEST_CASE("gap report covers the drifted case") {
  // constant drift c: the terminal event is a mean shift, still Gaussian
  const CoefficientField field = constant_field(1, 1, 0.5, 1.0);
  const PathEvent e = PathEvent::level(1.2);
  const std::vector<double> ladder{0.4, 0.2};
  const LdpReport report =
      ldp_gap_report(field, e, std::vector<double>{0.0}, ladder, 20000, 1024, 32, 2, 23);
  CHECK(report.rate.rate > 0.0);
  CHECK(std::abs(report.rows.back().gap) < std::abs(report.rows.front().gap));
}

TEST_CASE("closeness report on exact additive coupling") {
  // b = 0, sigma = 1: restriction couples the schemes exactly at shared nodes
  const CoefficientField field = constant_field(1, 1, 0.0, 1.0);
  nlohmann::json params{{"d", 1}, {"m", 1}, {"b", 0.0}, {"sigma0", 1.0}};
  const CoefficientField bounded = truncate_field(field, 10.0, 64);
  const std::vector<int> ladder{8, 32};
  const ClosenessReport report = euler_closeness(bounded, 0.1, ladder, 0.1,
                                                 std::vector<double>{0.0}, 500, 29, 2, 4);
  for (const auto& row : report.rows) CHECK(row.exceed == 0);
  CHECK(report.nonincreasing_2se);
}

TEST_CASE("closeness with zero diffusion is a deterministic threshold") {
  // No noise: every trial sees the same Euler error, so each rung's
  // exceedance is all-or-nothing and drops to zero once the mesh resolves
  // the drift. The sine drift from this start needs only a modest mesh.
  const SineSeriesField sine(64, 0.0);
  const CoefficientField field = truncate_field(sine.field(), 4.0, 64);
  const std::vector<int> ladder{2, 8, 32};
  const ClosenessReport report = euler_closeness(field, 1.0, ladder, 0.01,
                                                 std::vector<double>{0.7, 0.9}, 50, 5, 2, 16);
  for (const auto& row : report.rows)
    CHECK((row.exceed == 0 || row.exceed == row.trials));
  CHECK(report.rows.back().exceed == 0);
  CHECK(report.nonincreasing_2se);
}

TEST_CASE("closeness requires a bounded field and a small delta") {
  const CoefficientField unbounded = make_field("linear", {{"gain", 1.0}, {"sigma0", 1.0}});
  const std::vector<int> ladder{8, 32};
  CHECK_THROWS_AS(euler_closeness(unbounded, 0.1, ladder, 0.1, std::vector<double>{0.0}, 100, 1, 1),
                  validation_error);
  const CoefficientField bounded = truncate_field(unbounded, 5.0, 64);
  CHECK_THROWS_AS(euler_closeness(bounded, 0.1, ladder, 0.5, std::vector<double>{0.0}, 100, 1, 1),
                  validation_error);
}

TEST_CASE("closeness column on the truncated sine field") {
  const SineSeriesField sine(64, 1.0);
  const CoefficientField field = truncate_field(sine.field(), 6.0, 128);
  const std::vector<int> ladder{8, 32, 128};
  const ClosenessReport report = euler_closeness(field, 0.1, ladder, 0.1,
                                                 std::vector<double>{0.2, 0.2}, 1000, 37, 2, 16);
  CHECK(report.reference_steps == 2048);
  CHECK(report.nonincreasing_2se);
  CHECK(report.rows.back().exceed == 0);
}
