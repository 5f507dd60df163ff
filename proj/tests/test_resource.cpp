#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stmpc/resource.hpp"
#include "support/test_models.hpp"

using namespace stmpc;
using namespace stmpc::testing;

TEST_CASE("quadratic energy curve reproduces its tabulated values") {
  const ResourceModel m = energy_resource();
  CHECK(m.cost(0.01) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(m.cost(0.3) == doctest::Approx(0.13000409).epsilon(1e-12));
  CHECK(m.cost(1.0) == doctest::Approx(0.01007449).epsilon(1e-12));
}

TEST_CASE("one resource step: refill, spend, cap") {
  const ResourceModel m = energy_resource();
  // Full store plus a cheap interval saturates at the cap.
  CHECK(step_resource(m, 0.5, 0.3) == doctest::Approx(0.5).epsilon(1e-12));
  // Empty store: the level is exactly the net gain of the interval.
  CHECK(step_resource(m, 0.0, 0.3) == doctest::Approx(0.01999591).epsilon(1e-9));

  const ResourceModel bucket =
      make_resource_model(0.5, 1.0, ResourceCost::constant(0.25), 0.1, 1.0);
  CHECK(step_resource(bucket, 0.1, 0.5) == doctest::Approx(0.1).epsilon(1e-15));

  CHECK_THROWS_AS(step_resource(m, 0.2, 0.005), std::domain_error);
  CHECK_THROWS_AS(step_resource(m, 0.2, 1.5), std::domain_error);
}

TEST_CASE("recovery set of the energy curve matches the quadratic root") {
  const ResourceModel m = energy_resource();
  const auto set = recovery_set(m, 1e-3 * (m.dt_max - m.dt_min));
  REQUIRE(set.size() == 1);
  CHECK(set[0].lo == doctest::Approx(energy_recovery_root()).epsilon(1e-6));
  CHECK(set[0].hi == 1.0);
  // Certified endpoint: the reported left boundary itself recovers.
  CHECK(m.gain(set[0].lo) >= 0.0);
}

TEST_CASE("recovery set edge cases") {
  const ResourceModel no_refill =
      make_resource_model(0.0, 1.0, ResourceCost::constant(0.1), 0.0, 2.0);
  CHECK(recovery_set(no_refill, 1e-3).empty());

  // Constant cost with refill: recovery from c/p onward.
  const ResourceModel bucket =
      make_resource_model(0.5, 1.0, ResourceCost::constant(0.2), 0.0, 2.0);
  const auto set = recovery_set(bucket, 1e-3);
  REQUIRE(set.size() == 1);
  CHECK(set[0].lo == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(set[0].hi == 2.0);
}

TEST_CASE("assumption report on the energy model") {
  const AssumptionReport rep = check_assumptions(energy_resource());
  CHECK(rep.a2_holds);
  CHECK(rep.a3_holds);
  CHECK(rep.a4_holds);
  REQUIRE(rep.recovery_interval.has_value());
  CHECK(*rep.recovery_interval == doctest::Approx(energy_recovery_root()).epsilon(1e-6));
}

TEST_CASE("assumption failures are detected") {
  // Zero minimum interval with zero spend at 0: accumulation is possible.
  const ResourceModel zeno =
      make_resource_model(1.0, 1.0, ResourceCost::custom([](double) { return 0.0; }),
                          0.0, 1.0);
  const AssumptionReport rep = check_assumptions(zeno);
  CHECK_FALSE(rep.a2_holds);

  // Spend too high for the admissible range: recovery only beyond dt_max.
  const ResourceModel starved =
      make_resource_model(0.5, 1.0, ResourceCost::constant(2.0), 0.0, 1.0);
  const AssumptionReport r2 = check_assumptions(starved);
  CHECK_FALSE(r2.a3_holds);
  CHECK_FALSE(r2.a4_holds);
  CHECK(r2.notes.find("beyond dt_max") != std::string::npos);

  // Recovery exists on [0, dt_max] but the admissible window excludes it.
  const ResourceModel clipped = make_resource_model(
      0.5, 0.5, ResourceCost::quadratic_energy(0.2449, -0.4848, 0.25, 0.01), 0.01,
      0.17);
  const AssumptionReport r3 = check_assumptions(clipped);
  CHECK(r3.a2_holds);
  CHECK_FALSE(r3.a4_holds);
}

TEST_CASE("construction rejects invalid models") {
  CHECK_THROWS_AS(make_resource_model(-0.1, 1.0, ResourceCost::constant(0.1), 0, 1),
                  ConfigError);
  CHECK_THROWS_AS(make_resource_model(0.5, -1.0, ResourceCost::constant(0.1), 0, 1),
                  ConfigError);
  CHECK_THROWS_AS(make_resource_model(0.5, 1.0, ResourceCost::constant(0.1), 0.5, 0.2),
                  ConfigError);
  // The inverse-compute curve is singular at zero.
  CHECK_THROWS_AS(make_resource_model(0.5, 1.0, ResourceCost::inverse_compute(0.1),
                                      0.0, 1.0),
                  ConfigError);
  CHECK_NOTHROW(make_resource_model(0.5, 1.0, ResourceCost::inverse_compute(0.1),
                                    0.05, 1.0));
  // Negative cost on the admissible range is rejected by the grid check.
  CHECK_THROWS_AS(
      make_resource_model(0.5, 1.0, ResourceCost::quadratic_energy(0.0, 0.0, -0.1, 0.0),
                          0.0, 1.0),
      ConfigError);
}

TEST_CASE("step_resource is monotone in the level and capped") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ResourceModel models[] = {
      energy_resource(),
      make_resource_model(0.7, 0.8, ResourceCost::constant(0.15), 0.05, 1.2),
      make_resource_model(1.0, 2.0, ResourceCost::inverse_compute(0.05), 0.05, 1.0)};
  for (const ResourceModel& m : models) {
    for (int trial = 0; trial < 200; ++trial) {
      const double dt = m.dt_min + (m.dt_max - m.dt_min) * unit(rng);
      const double r1 = m.capacity * unit(rng);
      const double r2 = m.capacity * unit(rng);
      const double lo = std::min(r1, r2), hi = std::max(r1, r2);
      CHECK(step_resource(m, lo, dt) <= step_resource(m, hi, dt));
      CHECK(step_resource(m, hi, dt) <= m.capacity);
    }
  }
}

TEST_CASE("levels never shrink on recovery intervals") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ResourceModel m = energy_resource();
  const auto set = recovery_set(m, 1e-4);
  REQUIRE_FALSE(set.empty());
  for (int trial = 0; trial < 300; ++trial) {
    const Interval& iv = set[trial % set.size()];
    const double dt = iv.lo + (iv.hi - iv.lo) * unit(rng);
    const double r = m.capacity * unit(rng);
    CHECK(step_resource(m, r, dt) >= r - 1e-9);
  }
}

TEST_CASE("halving the grid step never loses a wide recovery interval") {
  // A wiggly custom curve with several recovery windows.
  const ResourceModel m = make_resource_model(
      1.0, 1.0,
      ResourceCost::custom([](double dt) {
        return std::max(0.0, dt + 0.25 * std::sin(12.0 * dt));
      }),
      0.0, 2.0);
  for (double grid : {0.05, 0.025, 0.0125}) {
    const auto coarse = recovery_set(m, grid);
    const auto fine = recovery_set(m, grid / 2.0);
    for (const Interval& iv : coarse) {
      if (iv.hi - iv.lo <= 2.0 * grid) continue;
      const double mid = 0.5 * (iv.lo + iv.hi);
      bool covered = false;
      for (const Interval& jv : fine)
        covered |= jv.lo <= mid && mid <= jv.hi;
      CHECK(covered);
    }
  }
}

TEST_CASE("reported recovery interval certifies nonnegative gain") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double c = 0.05 + 0.3 * unit(rng);
    const double p = 0.2 + unit(rng);
    const ResourceModel m = make_resource_model(
        p, 0.5 + unit(rng), ResourceCost::constant(c), 0.02, 0.5 + unit(rng));
    const AssumptionReport rep = check_assumptions(m);
    if (rep.a4_holds) {
      REQUIRE(rep.recovery_interval.has_value());
      CHECK(m.gain(*rep.recovery_interval) >= -1e-9);
      CHECK(*rep.recovery_interval >= m.dt_min);
      CHECK(*rep.recovery_interval <= m.dt_max);
    }
  }
}
