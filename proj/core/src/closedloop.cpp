#include "stmpc/closedloop.hpp"

#include <algorithm>
#include <cmath>

namespace stmpc {
namespace {

// Restores exact resource feasibility of an applied interval by the smallest
// nearby perturbation; the solver leaves at most exact_resource_tol of slack,
// so the search practically terminates on its first rungs.
std::optional<double> polish_interval(const ResourceModel& res, double r, double dt) {
  auto feasible = [&](double d) { return r + res.gain(d) >= 0.0; };
  if (feasible(dt)) return dt;
  const double range = std::max(res.dt_max - res.dt_min, 1e-12);
  for (double mag = 1e-12 * range; mag <= 1.5e-3 * range; mag *= 10.0) {
    for (double cand : {dt + mag, dt - mag}) {
      const double c = std::clamp(cand, res.dt_min, res.dt_max);
      if (feasible(c)) return c;
    }
  }
  return std::nullopt;
}

OcpInstance make_instance(const PlantModel& plant, const ResourceModel& resource,
                          const Vec& x, double r, const RunConfig& cfg) {
  OcpInstance inst;
  inst.horizon = cfg.horizon;
  inst.plant = plant;
  inst.resource = resource;
  inst.initial_state = x;
  inst.initial_resource = r;
  inst.terminal_mode = cfg.terminal_mode;
  inst.multi_step = cfg.multi_step;
  inst.integrator = cfg.integrator;
  inst.enforce_sample_state_box = cfg.enforce_sample_state_box;
  return inst;
}

}  // namespace

ClosedLoopLog run(const PlantModel& plant_in, const ResourceModel& resource,
                  const Vec& x0, double r0, const RunConfig& cfg,
                  std::vector<ScenarioEvent> events) {
  if (cfg.t_end < 0.0) throw ConfigError("run: t_end must be >= 0");
  if (r0 < 0.0 || r0 > resource.capacity)
    throw ConfigError("run: initial resource outside [0, capacity]");

  const AssumptionReport assumptions = check_assumptions(resource);
  if (!assumptions.all())
    throw ConfigError(
        "run: resource assumptions fail (a2=" + std::to_string(assumptions.a2_holds) +
        " a3=" + std::to_string(assumptions.a3_holds) +
        " a4=" + std::to_string(assumptions.a4_holds) +
        "); recursive feasibility and convergence are not guaranteed. " +
        assumptions.notes);

  PlantModel plant = plant_in;
  validate_plant(plant);
  std::sort(events.begin(), events.end(),
            [](const ScenarioEvent& a, const ScenarioEvent& b) {
              return a.at_time < b.at_time;
            });
  for (const ScenarioEvent& e : events) {
    // Each event must hand over a proper equilibrium; full model validation
    // about the new reference happens when the event fires.
    if (e.new_x_ref.size() != plant.state_dim || e.new_u_ref.size() != plant.input_dim)
      throw ConfigError("run: event reference has the wrong dimension");
    Vec dx(plant.state_dim);
    plant.vector_field(e.new_x_ref, e.new_u_ref, dx);
    if (dx.lpNorm<Eigen::Infinity>() > 1e-10)
      throw ConfigError("run: event reference pair is not an equilibrium");
  }

  ClosedLoopLog log;
  log.state_dim = plant.state_dim;
  log.input_dim = plant.input_dim;
  log.initial_resource = r0;
  log.refill_rate = resource.refill_rate;

  Vec x = x0;
  double r = r0;
  double t = 0.0;
  int k = 0;
  int epoch = 0;
  int solve_index = 0;
  size_t next_event = 0;

  std::optional<DecisionVector> warm;
  std::optional<OcpSolution> prev;  // last followed plan (solution or candidate)
  std::optional<AlmWarm> warm_duals;
  bool have_candidate = false;
  Vec last_u = plant.u_ref;

  while (t < cfg.t_end && log.termination_reason.empty()) {
    // Set-point events bind at the first sampling instant >= their time.
    while (next_event < events.size() && events[next_event].at_time <= t) {
      const ScenarioEvent& e = events[next_event++];
      plant = plant.with_reference(e.new_x_ref, e.new_u_ref);
      validate_plant(plant);
      ++epoch;
      prev.reset();
      have_candidate = false;
      warm.reset();  // previous shift belongs to the old reference
      warm_duals.reset();
    }

    OcpInstance inst = make_instance(plant, resource, x, r, cfg);

    bool use_fallback = false;
    SolveStatus status = SolveStatus::converged;
    DecisionVector decision;
    double vstar = 0.0;

    const bool injected_failure =
        cfg.inject_solver_failure && cfg.inject_solver_failure(solve_index);
    if (!injected_failure) {
      SolveOutcome outcome =
          solve(inst, warm, cfg.solver, warm_duals ? &*warm_duals : nullptr);
      status = outcome.status;
      if (status == SolveStatus::converged || status == SolveStatus::max_iters_feasible) {
        decision = outcome.solution.decision;
        vstar = outcome.solution.value;
        prev = std::move(outcome.solution);
        have_candidate =
            cfg.terminal_mode == TerminalMode::equality_to_reference && assumptions.a4_holds;
        // Duals change slowly along the loop; shift the stage-coupled block by
        // the applied prefix and reuse the penalty level.
        AlmWarm duals;
        duals.eq_multipliers = outcome.eq_multipliers;
        duals.ineq_multipliers = outcome.ineq_multipliers;
        const int N = cfg.horizon;
        if (outcome.ineq_multipliers.size() >= N) {
          for (int i = 0; i < N; ++i) {
            const int src = std::min(i + cfg.multi_step, N - 1);
            duals.ineq_multipliers[i] = outcome.ineq_multipliers[src];
          }
        }
        duals.penalty = std::min(outcome.penalty, 1e4);
        warm_duals = std::move(duals);
      } else {
        use_fallback = true;
      }
    } else {
      status = SolveStatus::infeasible;
      use_fallback = true;
    }

    if (use_fallback) {
      if (!have_candidate || !prev) {
        if (k == 0)
          throw InfeasibleStartError(
              "run: the initial optimal control problem is infeasible; the initial "
              "(state, resource) pair lies outside the feasible set");
        log.termination_reason =
            "optimization failed at t=" + std::to_string(t) +
            " with no feasible fallback candidate (status " + to_string(status) + ")";
        break;
      }
      decision = shift_candidate(inst, *prev, assumptions.recovery_interval);
      const RolloutResult ro = rollout(inst, decision);
      vstar = ro.objective;
      OcpSolution pseudo;
      pseudo.decision = decision;
      pseudo.states = ro.states;
      pseudo.resources = ro.resources;
      pseudo.value = ro.objective;
      prev = std::move(pseudo);
    }

    // Apply the first multi_step entries under zero-order hold.
    for (int i = 0; i < cfg.multi_step && t < cfg.t_end; ++i) {
      const Vec u = decision.inputs.col(i);
      std::optional<double> dt = polish_interval(resource, r, decision.intervals[i]);
      if (!dt) {
        log.termination_reason =
            "applied interval at t=" + std::to_string(t) +
            " cannot be made resource-feasible near the solver's choice";
        break;
      }
      const TrajectorySegment seg = apply_zoh(plant, x, u, *dt, cfg.integrator);
      const SampledStep step = propagate(plant, x, u, *dt, cfg.integrator);

      StepRecord rec;
      rec.k = k;
      rec.t = t;
      rec.dt = *dt;
      rec.x = x;
      rec.u = u;
      rec.r = r;
      rec.mu = resource.cost(*dt);
      rec.vstar = vstar;
      rec.stage_cost = step.accrued_cost;
      rec.status = status;
      rec.fallback = use_fallback;
      rec.solve_index = solve_index;
      rec.ref_epoch = epoch;
      rec.x_ref = plant.x_ref;
      log.steps.push_back(std::move(rec));

      const size_t dense_points =
          seg.times.size() > 1 ? seg.times.size() - 1 : seg.times.size();
      for (size_t j = 0; j < dense_points; ++j)
        log.dense.push_back({t + seg.times[j], seg.states[j], u});

      x = step.next_state;
      r = step_resource(resource, r, *dt);
      t += *dt;
      ++k;
      last_u = u;
    }
    ++solve_index;
    if (log.termination_reason.empty() && cfg.multi_step > 0)
      warm = shift_candidate(make_instance(plant, resource, x, r, cfg), *prev,
                             assumptions.recovery_interval);
  }

  log.t_final = t;
  log.r_final = r;
  log.x_final = x;
  log.x_ref_final = plant.x_ref;
  log.dense.push_back({t, x, last_u});
  return log;
}

}  // namespace stmpc
