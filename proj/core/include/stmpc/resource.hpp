#ifndef STMPC_RESOURCE_HPP
#define STMPC_RESOURCE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stmpc/types.hpp"

namespace stmpc {

/// Interval-dependent spend of the generalized token bucket.
///
/// Presets: a constant spend per sample, a quadratic energy curve
/// a*(dt-offset)^2 + b*(dt-offset) + d, an inverse compute curve kappa/dt
/// (undefined at 0, so it requires dt_min > 0), and an arbitrary callable.
class ResourceCost {
 public:
  enum class Kind { constant, quadratic_energy, inverse_compute, custom };

  static ResourceCost constant(double c);
  static ResourceCost quadratic_energy(double a, double b, double d, double offset);
  static ResourceCost inverse_compute(double kappa);
  static ResourceCost custom(std::function<double(double)> fn);

  double operator()(double dt) const;
  Kind kind() const { return kind_; }

  // Preset parameters (meaningful per kind; used by the scenario round trip).
  double c = 0, a = 0, b = 0, d = 0, offset = 0, kappa = 0;

 private:
  Kind kind_ = Kind::constant;
  std::function<double(double)> fn_;
};

struct ResourceModel {
  double refill_rate = 0;  // resource units per second
  double capacity = 0;     // storage cap
  ResourceCost cost;
  double dt_min = 0;
  double dt_max = 0;

  /// Net resource gain of spending one interval: refill_rate*dt - cost(dt).
  double gain(double dt) const { return refill_rate * dt - cost(dt); }
};

/// Validates and returns the model: refill_rate >= 0, capacity >= 0,
/// 0 <= dt_min <= dt_max, cost nonnegative on a dense grid of the admissible
/// range, and inverse_compute rejected when dt_min = 0.
ResourceModel make_resource_model(double refill_rate, double capacity,
                                  ResourceCost cost, double dt_min,
                                  double dt_max);

/// One step of the resource dynamics: min{r + dt*p - mu(dt), capacity}.
/// The result may be negative; feasibility is judged separately.
/// Throws std::domain_error when dt is outside [dt_min, dt_max].
double step_resource(const ResourceModel& model, double r, double dt);

struct Interval {
  double lo = 0;
  double hi = 0;
};

/// Subintervals of [lo, hi] where gain(dt) >= 0, found by a grid scan at
/// resolution grid_step with sign changes refined by bisection to
/// |gain| <= 1e-10. Reported endpoints lying on refined roots are snapped to
/// the side with gain >= 0. An empty result is a valid answer.
std::vector<Interval> recovery_set_on(const ResourceModel& model, double lo,
                                      double hi, double grid_step);

/// recovery_set_on over the admissible range [dt_min, dt_max].
std::vector<Interval> recovery_set(const ResourceModel& model, double grid_step);

struct AssumptionReport {
  bool a2_holds = false;  // dt_min = 0 with cost(0) > 0, or dt_min > 0
  bool a3_holds = false;  // some interval in [0, dt_max] has nonnegative gain
  bool a4_holds = false;  // some such interval is admissible
  std::optional<double> recovery_interval;  // smallest admissible recovery interval
  std::vector<Interval> d_set;              // recovery set within [dt_min, dt_max]
  std::string notes;
  bool all() const { return a2_holds && a3_holds && a4_holds; }
};

/// Evaluates the three resource assumptions with the default grid resolution
/// 1e-3 of the scanned range. a3 scans [0, dt_max]; intervals beyond dt_max
/// are invisible to the scan and the notes say so when a3 fails.
AssumptionReport check_assumptions(const ResourceModel& model);

}  // namespace stmpc

#endif
