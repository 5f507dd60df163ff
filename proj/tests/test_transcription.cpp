#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "stmpc/transcription.hpp"
#include "support/test_models.hpp"

using namespace stmpc;
using namespace stmpc::testing;

TEST_CASE("rollout at the reference stays put with zero objective") {
  OcpInstance inst = simple_instance(double_integrator_plant(), energy_resource(),
                                     vec2(0, 0), 0.5, 1,
                                     TerminalMode::equality_to_reference);
  DecisionVector d = make_decision(1, 1);
  d.intervals[0] = 0.5;
  const RolloutResult ro = rollout(inst, d);
  CHECK(ro.states.col(1).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(ro.objective <= 1e-12);
}

TEST_CASE("rollout composes closed-form double-integrator steps") {
  OcpInstance inst = simple_instance(double_integrator_plant(), energy_resource(),
                                     vec2(1, 0), 0.5, 2,
                                     TerminalMode::equality_to_reference);
  DecisionVector d = make_decision(1, 2);
  d.inputs << -2, -2;
  d.intervals << 0.5, 0.5;
  const RolloutResult ro = rollout(inst, d);
  CHECK(ro.states(0, 1) == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(ro.states(1, 1) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(ro.states(0, 2) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(ro.states(1, 2) == doctest::Approx(-2.0).epsilon(1e-9));
}

TEST_CASE("rollout tracks the exact resource recursion") {
  OcpInstance inst = simple_instance(double_integrator_plant(), energy_resource(),
                                     vec2(1, 0), 0.0, 1,
                                     TerminalMode::equality_to_reference);
  DecisionVector d = make_decision(1, 1);
  d.intervals[0] = 0.3;
  const RolloutResult ro = rollout(inst, d);
  CHECK(ro.resources[1] == doctest::Approx(0.01999591).epsilon(1e-9));
}

TEST_CASE("residuals: satisfied at a constructed feasible point") {
  OcpInstance inst = simple_instance(double_integrator_plant(), energy_resource(),
                                     vec2(0, 0), 0.5, 3,
                                     TerminalMode::equality_to_reference);
  const AssumptionReport rep = check_assumptions(inst.resource);
  const DecisionVector cand = reference_candidate(inst, *rep.recovery_interval);
  CHECK(residuals(inst, cand).max_violation() <= 1e-9);
}

TEST_CASE("residuals: interval bound violation shows up signed") {
  OcpInstance inst = simple_instance(double_integrator_plant(), energy_resource(),
                                     vec2(0, 0), 0.5, 2, TerminalMode::none);
  DecisionVector d = reference_candidate(inst, 0.5);
  d.intervals[0] = inst.resource.dt_max + 0.1;
  const ResidualReport rep = residuals(inst, d);
  CHECK(rep.interval_box[1] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("residuals: terminal equality reports the miss") {
  OcpInstance inst = simple_instance(double_integrator_plant(), energy_resource(),
                                     vec2(1, 0), 0.5, 1,
                                     TerminalMode::equality_to_reference);
  DecisionVector d = make_decision(1, 1);
  d.intervals[0] = 1.0;  // u = 0 keeps x1 at 1, x2 at 0
  const ResidualReport rep = residuals(inst, d);
  REQUIRE(rep.terminal_eq.size() == 2);
  CHECK(rep.terminal_eq[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.terminal_eq[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("residuals: optional sampled-state box") {
  PlantModel plant = double_integrator_plant();
  plant.sample_state_lower = vec2(-0.5, -5.0);
  plant.sample_state_upper = vec2(0.5, 5.0);
  OcpInstance inst = simple_instance(std::move(plant), energy_resource(), vec2(1, 0),
                                     0.5, 2, TerminalMode::none);
  inst.enforce_sample_state_box = true;
  const DecisionVector d = reference_candidate(inst, 0.5);
  const ResidualReport rep = residuals(inst, d);
  REQUIRE(rep.state_box.size() == 2 * 2 * 2);
  // x_0 = (1, 0) violates the upper bound on the first coordinate by 0.5.
  CHECK(rep.state_box[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("candidate shift drops the applied prefix and appends the idle pair") {
  OcpInstance inst = simple_instance(double_integrator_plant(), energy_resource(),
                                     vec2(0, 0), 0.5, 3,
                                     TerminalMode::equality_to_reference);
  OcpSolution prev;
  prev.decision = make_decision(1, 3);
  prev.decision.inputs << 0.3, -0.7, 1.1;
  prev.decision.intervals << 0.4, 0.6, 0.9;

  const DecisionVector cand = shift_candidate(inst, prev, 0.2);
  CHECK(cand.inputs(0, 0) == -0.7);
  CHECK(cand.inputs(0, 1) == 1.1);
  CHECK(cand.inputs(0, 2) == 0.0);
  CHECK(cand.intervals[0] == 0.6);
  CHECK(cand.intervals[1] == 0.9);
  CHECK(cand.intervals[2] == 0.2);

  OcpInstance whole = inst;
  whole.horizon = 2;
  whole.multi_step = 2;
  OcpSolution prev2;
  prev2.decision = make_decision(1, 2);
  prev2.decision.inputs << 0.5, -0.5;
  prev2.decision.intervals << 0.3, 0.4;
  const DecisionVector full = shift_candidate(whole, prev2, 0.2);
  CHECK(full.inputs(0, 0) == 0.0);
  CHECK(full.inputs(0, 1) == 0.0);
  CHECK(full.intervals[0] == 0.2);
  CHECK(full.intervals[1] == 0.2);

  CHECK_THROWS_AS(shift_candidate(inst, prev, std::nullopt), ConfigError);
}

TEST_CASE("candidate at the reference keeps zero objective") {
  OcpInstance inst = simple_instance(double_integrator_plant(), energy_resource(),
                                     vec2(0, 0), 0.5, 3,
                                     TerminalMode::equality_to_reference);
  OcpSolution prev;
  prev.decision = reference_candidate(inst, 0.4);
  const DecisionVector cand = shift_candidate(inst, prev, 0.3);
  CHECK(rollout(inst, cand).objective <= 1e-12);
}

TEST_CASE("relaxed resource sequences are dominated by the exact rollout") {
  // Any sequence satisfying the relaxed recursion lies below the exact
  // min-dynamics levels, so relaxed-feasible implies exactly feasible.
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ResourceModel m = energy_resource();
  for (int trial = 0; trial < 200; ++trial) {
    const int N = 6;
    OcpInstance inst = simple_instance(double_integrator_plant(), m, vec2(0, 0),
                                       m.capacity * unit(rng), N, TerminalMode::none);
    DecisionVector d = make_decision(1, N);
    for (int i = 0; i < N; ++i)
      d.intervals[i] = m.dt_min + (m.dt_max - m.dt_min) * unit(rng);
    const RolloutResult ro = rollout(inst, d);
    CHECK(ro.objective >= 0.0);

    Vec relaxed(N + 1);
    relaxed[0] = inst.initial_resource;
    bool relaxed_feasible = true;
    for (int i = 0; i < N; ++i) {
      const double slack = 0.2 * unit(rng);
      relaxed[i + 1] =
          std::min(relaxed[i] + m.gain(d.intervals[i]), m.capacity) - slack;
      relaxed_feasible &= relaxed[i + 1] >= 0.0;
    }
    for (int i = 0; i <= N; ++i) {
      CHECK(relaxed[i] <= ro.resources[i] + 1e-12);
      if (relaxed_feasible) CHECK(ro.resources[i] >= -1e-12);
    }
  }
}

TEST_CASE("instance validation") {
  OcpInstance inst = simple_instance(double_integrator_plant(), energy_resource(),
                                     vec2(0, 0), 0.5, 3,
                                     TerminalMode::equality_to_reference);
  CHECK_NOTHROW(validate_instance(inst));
  OcpInstance bad = inst;
  bad.horizon = 0;
  CHECK_THROWS_AS(validate_instance(bad), ConfigError);
  bad = inst;
  bad.multi_step = 4;
  CHECK_THROWS_AS(validate_instance(bad), ConfigError);
  bad = inst;
  bad.initial_resource = 0.6;
  CHECK_THROWS_AS(validate_instance(bad), ConfigError);
  bad = inst;
  bad.initial_state = vec1(0.0);
  CHECK_THROWS_AS(validate_instance(bad), ConfigError);
  bad = inst;
  bad.enforce_sample_state_box = true;  // plant has no box
  CHECK_THROWS_AS(validate_instance(bad), ConfigError);

  DecisionVector wrong = make_decision(1, 2);
  CHECK_THROWS_AS(rollout(inst, wrong), ConfigError);
}
