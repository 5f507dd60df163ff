#ifndef STMPC_CLOSEDLOOP_HPP
#define STMPC_CLOSEDLOOP_HPP

#include "stmpc/solver.hpp"

namespace stmpc {

/// Mid-run reference swap, applied at the first sampling instant >= at_time.
struct ScenarioEvent {
  double at_time = 0.0;
  Vec new_x_ref;
  Vec new_u_ref;
};

/// One applied sampling interval of the closed loop.
struct StepRecord {
  int k = 0;             // sampling index
  double t = 0.0;        // sampling instant
  double dt = 0.0;       // applied interval
  Vec x;                 // state at t
  Vec u;                 // input held on [t, t+dt)
  double r = 0.0;        // resource level at t
  double mu = 0.0;       // resource spend of dt
  double vstar = 0.0;    // optimal value of the producing solve
  double stage_cost = 0.0;  // integrated cost over the applied interval
  SolveStatus status = SolveStatus::converged;
  bool fallback = false;  // applied decision came from the shifted candidate
  int solve_index = 0;    // which solve produced this record
  int ref_epoch = 0;      // increments at each applied set-point change
  Vec x_ref;              // reference active at t
};

struct DensePoint {
  double t = 0.0;
  Vec x;
  Vec u;  // input active at t
};

struct ClosedLoopLog {
  std::vector<StepRecord> steps;
  std::vector<DensePoint> dense;
  double t_final = 0.0;
  double r_final = 0.0;
  Vec x_final;
  Vec x_ref_final;
  int state_dim = 0, input_dim = 0;
  double initial_resource = 0.0;
  double refill_rate = 0.0;
  std::string termination_reason;  // empty for a normal end-of-horizon stop
  bool completed() const { return termination_reason.empty(); }
};

struct RunConfig {
  int horizon = 20;
  int multi_step = 1;
  TerminalMode terminal_mode = TerminalMode::equality_to_reference;
  IntegratorConfig integrator;
  SolverConfig solver;
  bool enforce_sample_state_box = false;
  double t_end = 10.0;
  /// Test hook: pretend the solver failed at the given solve index to force
  /// the shifted-candidate fallback path. Unused by the CLI.
  std::function<bool(int solve_index)> inject_solver_failure;
};

/// Runs the self-triggered loop: solve, apply the first multi_step inputs and
/// intervals under zero-order hold, update the resource with the exact
/// min-dynamics, advance time; stops at the first sampling instant >= t_end
/// (intervals are never cut short). Solves are warm-started with the shifted
/// candidate, which also serves as the fallback when a solve fails after the
/// first success. Set-point events bind at the next sampling instant and reset
/// the warm start to the all-(u_ref, recovery-interval) candidate. Throws
/// ConfigError when assumptions a2-a4 fail and InfeasibleStartError when the
/// very first solve is infeasible; a later unrecoverable infeasibility stops
/// the run with a termination_reason instead.
ClosedLoopLog run(const PlantModel& plant, const ResourceModel& resource,
                  const Vec& x0, double r0, const RunConfig& cfg,
                  std::vector<ScenarioEvent> events = {});

}  // namespace stmpc

#endif
