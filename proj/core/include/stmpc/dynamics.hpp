#ifndef STMPC_DYNAMICS_HPP
#define STMPC_DYNAMICS_HPP

#include <functional>
#include <optional>
#include <vector>

#include "stmpc/types.hpp"

namespace stmpc {

/// Continuous-time plant with a reference pair and an input box.
///
/// The model owns the physical vector field f(x, u) and a deviation cost that
/// is positive definite about zero; the effective stage cost is
/// stage_cost(x, u) = deviation_cost(x - x_ref, u - u_ref), so a set-point
/// change is a pure coordinate translation and requires f(x_ref, u_ref) = 0.
///
/// User obligations that are not machine-checked: f must be locally Lipschitz
/// in x on the region of interest and the closed-loop trajectories absolutely
/// continuous. All built-in plants satisfy both.
struct PlantModel {
  int state_dim = 0;
  int input_dim = 0;
  std::function<void(const Vec& x, const Vec& u, Vec& dx)> vector_field;
  std::function<double(const Vec& x_dev, const Vec& u_dev)> deviation_cost;
  Vec input_lower;
  Vec input_upper;
  Vec x_ref;
  Vec u_ref;
  std::optional<Vec> sample_state_lower;  // optional per-sample state box
  std::optional<Vec> sample_state_upper;

  double stage_cost(const Vec& x, const Vec& u) const {
    return deviation_cost(x - x_ref, u - u_ref);
  }

  /// Same plant with a new reference pair (used for set-point changes).
  PlantModel with_reference(Vec new_x_ref, Vec new_u_ref) const;
};

/// Throws ConfigError unless the model satisfies its construction invariants:
/// ordered input box containing u_ref, equilibrium at the reference
/// (max-norm of f there below 1e-10), zero cost at the reference and strictly
/// positive cost on a deterministic sample of nearby points.
void validate_plant(const PlantModel& model);

struct IntegratorConfig {
  double h_max = 0.01;  // maximum substep length, seconds
  static constexpr const char* method = "rk4";
};

struct SampledStep {
  Vec next_state;
  double accrued_cost = 0.0;
};

/// State transition and integrated stage cost over one zero-order-hold
/// interval, computed with ceil(dt / h_max) equal classical RK4 substeps on
/// the state augmented with a running-cost coordinate. dt = 0 returns
/// (x, 0) exactly. Throws std::domain_error for dt < 0, ConfigError when u
/// leaves the input box by more than 1e-12, DivergenceError on non-finite
/// values (the message names the substep).
SampledStep propagate(const PlantModel& model, const Vec& x, const Vec& u,
                      double dt, const IntegratorConfig& cfg);

/// Same integration path as propagate but without the input-box precondition;
/// the transcription layer needs evaluability marginally outside the box for
/// finite differences at active bounds.
SampledStep propagate_free(const PlantModel& model, const Vec& x, const Vec& u,
                           double dt, const IntegratorConfig& cfg);

/// Accrued cost of propagate at the reference pair. Vanishes for any dt
/// because the reference is an equilibrium of f.
double zero_cost_check(const PlantModel& model, double dt,
                       const IntegratorConfig& cfg);

/// Dense intra-sample trajectory under a held input: states at every
/// integrator substep boundary, (dt relative) times in [0, dt]. The final
/// point equals propagate's next_state bit for bit (same integration path).
struct TrajectorySegment {
  std::vector<double> times;
  std::vector<Vec> states;
};
TrajectorySegment apply_zoh(const PlantModel& model, const Vec& x, const Vec& u,
                            double dt, const IntegratorConfig& cfg);

/// Closed-form transition and exact polynomial-integral cost for the double
/// integrator with quadratic deviation cost q1*e1^2 + q2*e2^2 + ru*(u-u_ref)^2
/// about (x_ref, u_ref). Reference route for tests and order checks; not used
/// by any production code path.
SampledStep oracle_double_integrator(const Vec& x, double u, double dt,
                                     const Vec& x_ref, double u_ref,
                                     double q1 = 100.0, double q2 = 100.0,
                                     double ru = 1.0);
SampledStep oracle_double_integrator(const Vec& x, double u, double dt);

}  // namespace stmpc

#endif
