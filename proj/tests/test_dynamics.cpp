#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "stmpc/dynamics.hpp"
#include "support/test_models.hpp"

using namespace stmpc;
using namespace stmpc::testing;

namespace {
const IntegratorConfig kFine{0.01};
}

TEST_CASE("propagate matches the closed-form double integrator transition") {
  const PlantModel plant = double_integrator_plant();
  const SampledStep step = propagate(plant, vec2(1, 0), vec1(-2), 0.5, kFine);
  CHECK(step.next_state[0] == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(step.next_state[1] == doctest::Approx(-1.0).epsilon(1e-10));
  // Analytic integral of 100(1-t^2)^2 + 400t^2 + 4 over [0, 0.5].
  const double expected = 52.0 + 25.0 / 3.0 + 0.625;
  CHECK(step.accrued_cost == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("zero-length interval is the exact identity") {
  const PlantModel plant = pendulum_plant();
  const Vec x = vec2(0.7, -0.3);
  const SampledStep step = propagate(plant, x, vec1(0.5), 0.0, kFine);
  CHECK(step.next_state[0] == x[0]);
  CHECK(step.next_state[1] == x[1]);
  CHECK(step.accrued_cost == 0.0);
}

TEST_CASE("running cost vanishes along the reference trajectory") {
  CHECK(zero_cost_check(double_integrator_plant(), 1.0, kFine) <= 1e-10);
  // After a set-point change the shifted cost vanishes at the new reference.
  const PlantModel moved = double_integrator_plant(vec2(1, 0), 0.0);
  CHECK(zero_cost_check(moved, 0.3, kFine) <= 1e-10);
  CHECK(zero_cost_check(moved, 0.0, kFine) == 0.0);
}

TEST_CASE("double integrator oracle closed forms") {
  SampledStep s = oracle_double_integrator(vec2(1, 0), -2.0, 0.5);
  CHECK(s.next_state[0] == 0.75);
  CHECK(s.next_state[1] == -1.0);
  CHECK(s.accrued_cost == doctest::Approx(52.0 + 25.0 / 3.0 + 0.625).epsilon(1e-14));

  s = oracle_double_integrator(vec2(0, 0), 0.0, 3.7);
  CHECK(s.next_state.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(s.accrued_cost == 0.0);

  s = oracle_double_integrator(vec2(0, 1), 0.0, 2.0);
  CHECK(s.next_state[0] == 2.0);
  CHECK(s.next_state[1] == 1.0);
  CHECK(s.accrued_cost == doctest::Approx(1400.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("propagate agrees with the oracle over a parameter grid") {
  const PlantModel plant = double_integrator_plant();
  int points = 0;
  for (double x1 : {-1.5, -0.2, 0.9, 2.0})
    for (double x2 : {-1.0, 0.3, 1.2})
      for (double u : {-2.0, -0.4, 1.1})
        for (double dt : {0.07, 0.31, 0.85}) {
          const SampledStep got = propagate(plant, vec2(x1, x2), vec1(u), dt, kFine);
          const SampledStep want = oracle_double_integrator(vec2(x1, x2), u, dt);
          CHECK((got.next_state - want.next_state).lpNorm<Eigen::Infinity>() <= 1e-8);
          CHECK(std::abs(got.accrued_cost - want.accrued_cost) <=
                1e-6 * std::max(1.0, want.accrued_cost));
          ++points;
        }
  CHECK(points >= 100);
}

TEST_CASE("held input splits compose: state semigroup and cost additivity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const PlantModel& plant : {double_integrator_plant(), pendulum_plant()}) {
    for (int trial = 0; trial < 25; ++trial) {
      const Vec x = vec2(2.0 * unit(rng) - 1.0, 2.0 * unit(rng) - 1.0);
      const Vec u = vec1(1.6 * unit(rng) - 0.8);
      const double d1 = 0.05 + 0.4 * unit(rng);
      const double d2 = 0.05 + 0.4 * unit(rng);
      const SampledStep whole = propagate(plant, x, u, d1 + d2, kFine);
      const SampledStep first = propagate(plant, x, u, d1, kFine);
      const SampledStep second = propagate(plant, first.next_state, u, d2, kFine);
      CHECK((whole.next_state - second.next_state).lpNorm<Eigen::Infinity>() <= 1e-8);
      CHECK(std::abs(whole.accrued_cost - (first.accrued_cost + second.accrued_cost)) <=
            1e-8);
    }
  }
}

TEST_CASE("substep halving shows fourth-order convergence on the pendulum") {
  const PlantModel plant = pendulum_plant();
  const Vec x = vec2(1.0, 0.5);
  const Vec u = vec1(0.3);
  const double dt = 0.8;
  const SampledStep ref = propagate(plant, x, u, dt, IntegratorConfig{dt / 4096});

  double prev_err = -1.0;
  for (double h : {dt / 8, dt / 16, dt / 32}) {
    const SampledStep got = propagate(plant, x, u, dt, IntegratorConfig{h});
    const double err = (got.next_state - ref.next_state).lpNorm<Eigen::Infinity>();
    if (prev_err > 0.0) CHECK(prev_err / err >= 8.0);
    prev_err = err;
  }
}

TEST_CASE("errors: negative interval, input box, divergence") {
  const PlantModel plant = double_integrator_plant();
  CHECK_THROWS_AS(propagate(plant, vec2(0, 0), vec1(0), -0.1, kFine),
                  std::domain_error);
  CHECK_THROWS_AS(propagate(plant, vec2(0, 0), vec1(5.0), 0.1, kFine), ConfigError);
  CHECK_NOTHROW(propagate_free(plant, vec2(0, 0), vec1(5.0), 0.1, kFine));

  // Quadratic growth blows up in finite time; the error names the substep.
  PlantModel blowup = plant;
  blowup.vector_field = [](const Vec& x, const Vec&, Vec& dx) {
    dx[0] = x[0] * x[0];
    dx[1] = 0.0;
  };
  try {
    propagate_free(blowup, vec2(40.0, 0.0), vec1(0), 1.0, kFine);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("substep") != std::string::npos);
    CHECK(e.substep() >= 1);
  }
}

TEST_CASE("plant validation rejects broken models") {
  PlantModel plant = double_integrator_plant();
  CHECK_NOTHROW(validate_plant(plant));

  PlantModel bad_box = plant;
  bad_box.input_lower = vec1(3.0);  // lower > upper
  CHECK_THROWS_AS(validate_plant(bad_box), ConfigError);

  PlantModel bad_ref = plant;
  bad_ref.u_ref = vec1(5.0);
  CHECK_THROWS_AS(validate_plant(bad_ref), ConfigError);

  PlantModel not_equilibrium = plant;
  not_equilibrium.x_ref = vec2(0.0, 1.0);  // f = (1, 0) there
  CHECK_THROWS_AS(validate_plant(not_equilibrium), ConfigError);

  PlantModel flat_cost = plant;
  flat_cost.deviation_cost = [](const Vec&, const Vec&) { return 0.0; };
  CHECK_THROWS_AS(validate_plant(flat_cost), ConfigError);
}

TEST_CASE("apply_zoh returns the substep grid and matches propagate bit for bit") {
  const PlantModel plant = double_integrator_plant();
  const TrajectorySegment seg =
      apply_zoh(plant, vec2(1, 0), vec1(-2), 0.5, IntegratorConfig{0.25});
  REQUIRE(seg.times.size() == 3);
  CHECK(seg.times[1] == doctest::Approx(0.25));
  CHECK(seg.states[1][0] == doctest::Approx(0.9375).epsilon(1e-12));
  CHECK(seg.states[1][1] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(seg.states[2][0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(seg.states[2][1] == doctest::Approx(-1.0).epsilon(1e-12));

  const SampledStep step = propagate(plant, vec2(1, 0), vec1(-2), 0.5,
                                     IntegratorConfig{0.25});
  CHECK(seg.states.back()[0] == step.next_state[0]);
  CHECK(seg.states.back()[1] == step.next_state[1]);

  const TrajectorySegment point = apply_zoh(plant, vec2(1, 0), vec1(-2), 0.0, kFine);
  REQUIRE(point.times.size() == 1);
  CHECK(point.states[0][0] == 1.0);
}

TEST_CASE("registry: built-ins exist, unknown names rejected, extensions work") {
  const auto names = registered_plants();
  CHECK(std::find(names.begin(), names.end(), "double_integrator") != names.end());
  CHECK(std::find(names.begin(), names.end(), "pendulum") != names.end());
  CHECK(std::find(names.begin(), names.end(), "scalar_linear") != names.end());

  PlantConfig pc;
  pc.x_ref = vec1(0);
  pc.u_ref = vec1(0);
  pc.input_lower = vec1(-1);
  pc.input_upper = vec1(1);
  pc.state_weights = vec1(1);
  pc.input_weights = vec1(1);
  CHECK_THROWS_AS(make_plant("no_such_plant", pc), ConfigError);

  register_plant("test_decay", PlantDefinition{1, 1,
                                               [](const Vec& x, const Vec& u, Vec& dx) {
                                                 dx[0] = -2.0 * x[0] + u[0];
                                               }});
  const PlantModel custom = make_plant("test_decay", pc);
  CHECK(custom.state_dim == 1);
}
