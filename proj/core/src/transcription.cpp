#include "stmpc/transcription.hpp"

#include <cmath>

namespace stmpc {

void validate_instance(const OcpInstance& inst) {
  if (inst.horizon < 1) throw ConfigError("ocp: horizon must be >= 1");
  if (inst.multi_step < 1 || inst.multi_step > inst.horizon)
    throw ConfigError("ocp: multi_step must lie in [1, horizon]");
  if (inst.initial_state.size() != inst.plant.state_dim)
    throw ConfigError("ocp: initial state has the wrong dimension");
  if (inst.initial_resource < 0.0 || inst.initial_resource > inst.resource.capacity)
    throw ConfigError("ocp: initial resource outside [0, capacity]");
  if (inst.enforce_sample_state_box && !inst.plant.sample_state_lower)
    throw ConfigError("ocp: sample-state box requested but the plant has none");
}

DecisionVector make_decision(int input_dim, int horizon) {
  DecisionVector d;
  d.inputs = Mat::Zero(input_dim, horizon);
  d.intervals = Vec::Zero(horizon);
  return d;
}

namespace {

void check_shape(const OcpInstance& inst, const DecisionVector& d) {
  if (d.inputs.rows() != inst.plant.input_dim || d.inputs.cols() != inst.horizon ||
      d.intervals.size() != inst.horizon)
    throw ConfigError("decision vector shape does not match the instance");
}

}  // namespace

RolloutResult rollout(const OcpInstance& inst, const DecisionVector& d) {
  check_shape(inst, d);
  const int N = inst.horizon;
  RolloutResult out;
  out.states = Mat(inst.plant.state_dim, N + 1);
  out.resources = Vec(N + 1);
  out.stage_costs = Vec(N);
  out.states.col(0) = inst.initial_state;
  out.resources[0] = inst.initial_resource;

  Vec x = inst.initial_state;
  double r = inst.initial_resource;
  double objective = 0.0;
  for (int i = 0; i < N; ++i) {
    const SampledStep step =
        propagate_free(inst.plant, x, d.inputs.col(i), d.intervals[i], inst.integrator);
    x = step.next_state;
    r = std::min(r + inst.resource.gain(d.intervals[i]), inst.resource.capacity);
    out.states.col(i + 1) = x;
    out.resources[i + 1] = r;
    out.stage_costs[i] = step.accrued_cost;
    objective += step.accrued_cost;
  }
  out.objective = objective;
  return out;
}

double ResidualReport::max_violation() const {
  double v = 0.0;
  auto ineq = [&v](const Vec& block) {
    for (int i = 0; i < block.size(); ++i) v = std::max(v, block[i]);
  };
  ineq(resource_level);
  ineq(resource_relax);
  ineq(resource_cap);
  ineq(input_box);
  ineq(interval_box);
  ineq(state_box);
  for (int i = 0; i < terminal_eq.size(); ++i)
    v = std::max(v, std::abs(terminal_eq[i]));
  return v;
}

Vec ResidualReport::stacked() const {
  Vec all(resource_level.size() + resource_relax.size() + resource_cap.size() +
          input_box.size() + interval_box.size() + terminal_eq.size() +
          state_box.size());
  int at = 0;
  for (const Vec* block : {&resource_level, &resource_relax, &resource_cap,
                           &input_box, &interval_box, &terminal_eq, &state_box}) {
    all.segment(at, block->size()) = *block;
    at += static_cast<int>(block->size());
  }
  return all;
}

ResidualReport residuals(const OcpInstance& inst, const DecisionVector& d) {
  check_shape(inst, d);
  const int N = inst.horizon;
  const int m = inst.plant.input_dim;
  const int n = inst.plant.state_dim;
  const RolloutResult ro = rollout(inst, d);

  ResidualReport rep;
  rep.resource_level = -ro.resources;
  rep.resource_relax = Vec(N);
  rep.resource_cap = Vec(N);
  for (int i = 0; i < N; ++i) {
    rep.resource_relax[i] =
        ro.resources[i + 1] - (ro.resources[i] + inst.resource.gain(d.intervals[i]));
    rep.resource_cap[i] = ro.resources[i + 1] - inst.resource.capacity;
  }

  rep.input_box = Vec(2 * N * m);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < m; ++j) {
      rep.input_box[2 * (i * m + j)] = inst.plant.input_lower[j] - d.inputs(j, i);
      rep.input_box[2 * (i * m + j) + 1] = d.inputs(j, i) - inst.plant.input_upper[j];
    }

  rep.interval_box = Vec(2 * N);
  for (int i = 0; i < N; ++i) {
    rep.interval_box[2 * i] = inst.resource.dt_min - d.intervals[i];
    rep.interval_box[2 * i + 1] = d.intervals[i] - inst.resource.dt_max;
  }

  if (inst.terminal_mode == TerminalMode::equality_to_reference)
    rep.terminal_eq = ro.states.col(N) - inst.plant.x_ref;
  else
    rep.terminal_eq = Vec(0);

  if (inst.enforce_sample_state_box && inst.plant.sample_state_lower) {
    rep.state_box = Vec(2 * n * N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < n; ++j) {
        rep.state_box[2 * (i * n + j)] =
            (*inst.plant.sample_state_lower)[j] - ro.states(j, i);
        rep.state_box[2 * (i * n + j) + 1] =
            ro.states(j, i) - (*inst.plant.sample_state_upper)[j];
      }
  } else {
    rep.state_box = Vec(0);
  }
  return rep;
}

DecisionVector shift_candidate(const OcpInstance& inst, const OcpSolution& prev,
                               std::optional<double> recovery_interval) {
  check_shape(inst, prev.decision);
  if (!recovery_interval)
    throw ConfigError(
        "shift_candidate: no recovery interval available (assumption a4 fails)");
  const int N = inst.horizon;
  const int M = inst.multi_step;
  DecisionVector cand = make_decision(inst.plant.input_dim, N);
  for (int i = 0; i < N - M; ++i) {
    cand.inputs.col(i) = prev.decision.inputs.col(i + M);
    cand.intervals[i] = prev.decision.intervals[i + M];
  }
  for (int i = N - M; i < N; ++i) {
    cand.inputs.col(i) = inst.plant.u_ref;
    cand.intervals[i] = *recovery_interval;
  }
  return cand;
}

DecisionVector reference_candidate(const OcpInstance& inst, double dt) {
  DecisionVector d = make_decision(inst.plant.input_dim, inst.horizon);
  d.inputs.colwise() = inst.plant.u_ref;
  d.intervals.setConstant(dt);
  return d;
}

}  // namespace stmpc
