#ifndef STMPC_SCENARIO_HPP
#define STMPC_SCENARIO_HPP

#include <string>

#include "stmpc/closedloop.hpp"
#include "stmpc/registry.hpp"

namespace stmpc {

/// Flat, sectioned key-value scenario description. Sections: [plant],
/// [resource], [controller], [run]. '#' starts a comment; vector values are
/// whitespace-separated decimals; unknown keys are rejected with a line
/// diagnostic; scalar keys may appear once ('event' may repeat). All numeric
/// values are SI.
struct Scenario {
  // [plant]
  std::string plant_name;
  Vec x0, x_ref, u_ref, input_lower, input_upper, state_weights, input_weights;
  std::optional<Vec> state_lower, state_upper;

  // [resource]
  std::string variant;  // constant | quadratic_energy | inverse_compute
  double a = 0, b = 0, d = 0, offset = 0, c = 0, kappa = 0;
  bool offset_set = false;  // quadratic offset defaults to delta_min
  double p = 0, r_cap = 0, r0 = 0, delta_min = 0, delta_max = 0;

  // [controller]
  int horizon = 20;
  int multi_step = 1;
  std::string terminal = "equality_to_reference";  // or "none"
  double h_max = 0.01;
  bool enforce_state_box = false;
  struct SolverOverrides {
    std::optional<double> constraint_tol, stationarity_tol, penalty_init,
        penalty_growth, fd_step_rel, exact_resource_tol, multiplier_cap;
    std::optional<int> outer_iters_max, inner_iters_max;
  } solver;

  // [run]
  double t_end = 0;
  struct EventSpec {
    double at_time = 0;
    Vec x_ref, u_ref;
  };
  std::vector<EventSpec> events;
  std::string out_dir;  // empty: fall back to $STMPC_OUT_DIR, then "out"
  unsigned long long seed = 0;
};

/// Parses scenario text; `origin` names the source in diagnostics. Enforces
/// all construction invariants of the referenced models (the plant and the
/// resource model are actually built and validated).
Scenario parse_scenario(const std::string& text, const std::string& origin);
Scenario load_scenario(const std::string& path);

/// Canonical text form: fixed section and key order, 17-significant-digit
/// numbers, events sorted by time. parse(dump(s)) reproduces s exactly.
std::string dump_normalized(const Scenario& s);

bool scenario_equal(const Scenario& a, const Scenario& b);

PlantModel scenario_plant(const Scenario& s);
ResourceModel scenario_resource(const Scenario& s);
RunConfig scenario_run_config(const Scenario& s);
std::vector<ScenarioEvent> scenario_events(const Scenario& s);

}  // namespace stmpc

#endif
