#ifndef STMPC_TESTS_SUPPORT_TEST_MODELS_HPP
#define STMPC_TESTS_SUPPORT_TEST_MODELS_HPP

#include <random>

#include "stmpc/registry.hpp"
#include "stmpc/resource.hpp"
#include "stmpc/transcription.hpp"

namespace stmpc::testing {

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

inline Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

inline PlantModel double_integrator_plant(Vec x_ref = Vec::Zero(2),
                                          double u_ref = 0.0, double q1 = 100.0,
                                          double q2 = 100.0, double ru = 1.0,
                                          double u_lo = -2.0, double u_hi = 2.0) {
  PlantConfig pc;
  pc.x_ref = std::move(x_ref);
  pc.u_ref = vec1(u_ref);
  pc.input_lower = vec1(u_lo);
  pc.input_upper = vec1(u_hi);
  pc.state_weights = vec2(q1, q2);
  pc.input_weights = vec1(ru);
  return make_plant("double_integrator", pc);
}

inline PlantModel pendulum_plant() {
  PlantConfig pc;
  pc.x_ref = Vec::Zero(2);
  pc.u_ref = vec1(0.0);
  pc.input_lower = vec1(-3.0);
  pc.input_upper = vec1(3.0);
  pc.state_weights = vec2(10.0, 1.0);
  pc.input_weights = vec1(0.1);
  return make_plant("pendulum", pc);
}

inline PlantModel scalar_plant() {
  PlantConfig pc;
  pc.x_ref = vec1(0.0);
  pc.u_ref = vec1(0.0);
  pc.input_lower = vec1(-2.0);
  pc.input_upper = vec1(2.0);
  pc.state_weights = vec1(4.0);
  pc.input_weights = vec1(0.5);
  return make_plant("scalar_linear", pc);
}

// Energy-style quadratic spend curve used throughout the examples:
// 0.2449 (dt-0.01)^2 - 0.4848 (dt-0.01) + 0.25 on [0.01, 1], refill 0.5,
// cap 0.5.
inline ResourceModel energy_resource() {
  return make_resource_model(
      0.5, 0.5, ResourceCost::quadratic_energy(0.2449, -0.4848, 0.25, 0.01), 0.01,
      1.0);
}

// Left endpoint of the recovery set of energy_resource(), from the quadratic
// formula (independent of the scan-and-bisect route).
inline double energy_recovery_root() {
  // 0.5 (s + o) - (a s^2 + b s + d) = 0  ->  a s^2 - (0.5 - b) s + (d - 0.5 o) = 0
  const double a = 0.2449, b = -0.4848, d = 0.25, o = 0.01;
  const double B = 0.5 - b;
  const double disc = B * B - 4.0 * a * (d - 0.5 * o);
  return (B - std::sqrt(disc)) / (2.0 * a) + o;
}

inline OcpInstance simple_instance(PlantModel plant, ResourceModel resource,
                                   Vec x0, double r0, int horizon,
                                   TerminalMode terminal, double h_max = 0.01) {
  OcpInstance inst;
  inst.horizon = horizon;
  inst.plant = std::move(plant);
  inst.resource = std::move(resource);
  inst.initial_state = std::move(x0);
  inst.initial_resource = r0;
  inst.terminal_mode = terminal;
  inst.integrator.h_max = h_max;
  return inst;
}

// Plain token bucket with generous refill; useful when the resource should
// not bind.
inline ResourceModel slack_resource(double dt_min = 0.1, double dt_max = 1.0) {
  return make_resource_model(10.0, 5.0, ResourceCost::constant(0.1), dt_min, dt_max);
}

// ---------------------------------------------------------------------------
// Randomized feasible instances: the input/interval tail is constructed so
// that rolling out from x_ref BACKWARD defines an initial state from which
// a known decision reaches the reference exactly; with all intervals in the
// recovery set, any initial resource level is feasible.
// ---------------------------------------------------------------------------

struct RandomInstance {
  OcpInstance instance;
  DecisionVector feasible_decision;
};

inline RandomInstance random_feasible_instance(std::mt19937_64& rng,
                                               bool tight_tols = false) {
  std::uniform_int_distribution<int> pick_plant(0, 2);
  std::uniform_int_distribution<int> pick_horizon(2, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int which = pick_plant(rng);
  PlantModel plant = which == 0   ? double_integrator_plant()
                     : which == 1 ? pendulum_plant()
                                  : scalar_plant();
  const int N = pick_horizon(rng);

  // A recovery-friendly constant-cost bucket: spend c, refill p with
  // p*dt_rec = 2c so half the admissible range recovers.
  const double c = 0.05 + 0.2 * unit(rng);
  const double dt_min = 0.02 + 0.05 * unit(rng);
  const double dt_max = 0.6 + 0.4 * unit(rng);
  const double dt_rec = 0.5 * (dt_min + dt_max);
  const double p = c / dt_rec * (1.0 + 0.5 * unit(rng));
  const double cap = 0.3 + unit(rng);
  ResourceModel resource =
      make_resource_model(p, cap, ResourceCost::constant(c), dt_min, dt_max);

  // Backward construction: choose a recovery-set decision, integrate the
  // plant backward from the reference.
  const AssumptionReport rep = check_assumptions(resource);
  const double dtr = *rep.recovery_interval;
  DecisionVector d = make_decision(plant.input_dim, N);
  for (int i = 0; i < N; ++i) {
    d.intervals[i] = std::min(dt_max, dtr * (1.0 + 0.3 * unit(rng)));
    for (int j = 0; j < plant.input_dim; ++j) {
      const double span = std::min(plant.u_ref[j] - plant.input_lower[j],
                                   plant.input_upper[j] - plant.u_ref[j]);
      d.inputs(j, i) = plant.u_ref[j] + 0.4 * span * (2.0 * unit(rng) - 1.0);
    }
  }
  // Backward RK4: integrate the reversed field from x_ref through the stages
  // in reverse order.
  PlantModel reversed = plant;
  auto fwd = plant.vector_field;
  reversed.vector_field = [fwd](const Vec& x, const Vec& u, Vec& dx) {
    fwd(x, u, dx);
    dx = -dx;
  };
  IntegratorConfig integ;
  integ.h_max = 0.01;
  Vec x = plant.x_ref;
  for (int i = N - 1; i >= 0; --i)
    x = propagate_free(reversed, x, d.inputs.col(i), d.intervals[i], integ).next_state;

  OcpInstance inst;
  inst.horizon = N;
  inst.plant = std::move(plant);
  inst.resource = std::move(resource);
  inst.initial_state = x;
  inst.initial_resource = cap * unit(rng);
  inst.terminal_mode = TerminalMode::equality_to_reference;
  inst.integrator = integ;
  (void)tight_tols;
  return {std::move(inst), std::move(d)};
}

}  // namespace stmpc::testing

#endif
