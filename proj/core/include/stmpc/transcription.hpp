#ifndef STMPC_TRANSCRIPTION_HPP
#define STMPC_TRANSCRIPTION_HPP

#include "stmpc/dynamics.hpp"
#include "stmpc/resource.hpp"

namespace stmpc {

enum class TerminalMode { none, equality_to_reference };

/// One instance of the finite-horizon optimal control problem: plant and
/// resource models plus the initial condition and horizon layout.
struct OcpInstance {
  int horizon = 1;  // N >= 1
  PlantModel plant;
  ResourceModel resource;
  Vec initial_state;
  double initial_resource = 0.0;  // within [0, capacity]
  TerminalMode terminal_mode = TerminalMode::equality_to_reference;
  int multi_step = 1;  // M in [1, N], applied prefix length
  IntegratorConfig integrator;
  bool enforce_sample_state_box = false;
};

void validate_instance(const OcpInstance& inst);

/// Free optimization variables: one input column and one interval per stage.
struct DecisionVector {
  Mat inputs;     // input_dim x N
  Vec intervals;  // N

  int horizon() const { return static_cast<int>(intervals.size()); }
  int flat_size() const { return static_cast<int>(inputs.size() + intervals.size()); }
};

DecisionVector make_decision(int input_dim, int horizon);

/// States, exact min-dynamics resource levels and accumulated objective of a
/// decision. Constraints are not judged here.
struct RolloutResult {
  Mat states;       // state_dim x (N+1)
  Vec resources;    // N+1, exact min-dynamics
  Vec stage_costs;  // N
  double objective = 0.0;
};

RolloutResult rollout(const OcpInstance& inst, const DecisionVector& d);

/// Stacked constraint residuals at a decision, with the resource recursion's
/// min evaluated exactly. Inequality entries are satisfied when <= 0,
/// equality entries when = 0.
struct ResidualReport {
  Vec resource_level;  // N+1 entries: -r_i <= 0
  Vec resource_relax;  // N entries: r_{i+1} - (r_i + gain(dt_i)) <= 0
  Vec resource_cap;    // N entries: r_{i+1} - capacity <= 0
  Vec input_box;       // 2*N*m entries: lower/upper per stage
  Vec interval_box;    // 2*N entries
  Vec terminal_eq;     // state_dim entries when terminal mode is set, else 0
  Vec state_box;       // 2*n*N entries when the sample-state box is enforced

  /// Largest inequality violation / absolute equality residual.
  double max_violation() const;
  Vec stacked() const;
};

ResidualReport residuals(const OcpInstance& inst, const DecisionVector& d);

/// Solution report for one instance. states/resources are the exact rollout
/// of the decision; value is its rollout objective.
struct OcpSolution {
  DecisionVector decision;
  Mat states;
  Vec resources;
  double value = 0.0;
  double kkt_residual = 0.0;
  double feasibility_residual = 0.0;
};

/// The recursive-feasibility candidate: drop the first multi_step stages of
/// the previous solution and append (u_ref, recovery_interval) that many
/// times. Throws ConfigError when the recovery interval is absent.
DecisionVector shift_candidate(const OcpInstance& inst, const OcpSolution& prev,
                               std::optional<double> recovery_interval);

/// All-(u_ref, dt) decision; the cold-start guess and the post-event warm start.
DecisionVector reference_candidate(const OcpInstance& inst, double dt);

}  // namespace stmpc

#endif
