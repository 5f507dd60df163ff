#include "stmpc/resource.hpp"

#include <cmath>
#include <limits>

namespace stmpc {

ResourceCost ResourceCost::constant(double c) {
  if (c < 0.0) throw ConfigError("resource cost: constant must be >= 0");
  ResourceCost rc;
  rc.kind_ = Kind::constant;
  rc.c = c;
  return rc;
}

ResourceCost ResourceCost::quadratic_energy(double a, double b, double d,
                                            double offset) {
  ResourceCost rc;
  rc.kind_ = Kind::quadratic_energy;
  rc.a = a;
  rc.b = b;
  rc.d = d;
  rc.offset = offset;
  return rc;
}

ResourceCost ResourceCost::inverse_compute(double kappa) {
  if (kappa < 0.0) throw ConfigError("resource cost: kappa must be >= 0");
  ResourceCost rc;
  rc.kind_ = Kind::inverse_compute;
  rc.kappa = kappa;
  return rc;
}

ResourceCost ResourceCost::custom(std::function<double(double)> fn) {
  if (!fn) throw ConfigError("resource cost: empty custom function");
  ResourceCost rc;
  rc.kind_ = Kind::custom;
  rc.fn_ = std::move(fn);
  return rc;
}

double ResourceCost::operator()(double dt) const {
  switch (kind_) {
    case Kind::constant:
      return c;
    case Kind::quadratic_energy: {
      const double s = dt - offset;
      return a * s * s + b * s + d;
    }
    case Kind::inverse_compute:
      return kappa / dt;
    case Kind::custom:
      return fn_(dt);
  }
  return 0.0;
}

ResourceModel make_resource_model(double refill_rate, double capacity,
                                  ResourceCost cost, double dt_min,
                                  double dt_max) {
  if (refill_rate < 0.0) throw ConfigError("resource: refill_rate must be >= 0");
  if (capacity < 0.0) throw ConfigError("resource: capacity must be >= 0");
  if (!(0.0 <= dt_min && dt_min <= dt_max))
    throw ConfigError("resource: need 0 <= dt_min <= dt_max");
  if (cost.kind() == ResourceCost::Kind::inverse_compute && dt_min <= 0.0)
    throw ConfigError("resource: inverse_compute cost is singular at 0, needs dt_min > 0");

  ResourceModel model{refill_rate, capacity, std::move(cost), dt_min, dt_max};

  const int kGrid = 4096;
  for (int i = 0; i <= kGrid; ++i) {
    const double dt = dt_min + (dt_max - dt_min) * i / kGrid;
    const double mu = model.cost(dt);
    if (!(mu >= -1e-12) || !std::isfinite(mu))
      throw ConfigError("resource: cost is negative or non-finite on the admissible range");
  }
  return model;
}

double step_resource(const ResourceModel& model, double r, double dt) {
  if (dt < model.dt_min || dt > model.dt_max)
    throw std::domain_error("step_resource: interval outside [dt_min, dt_max]");
  return std::min(r + model.gain(dt), model.capacity);
}

namespace {

double gain_or_neg(const ResourceModel& model, double dt) {
  const double g = model.refill_rate * dt - model.cost(dt);
  return std::isfinite(g) ? g : -std::numeric_limits<double>::infinity();
}

// Bisects a sign change down to machine width and returns the bracket point
// with nonnegative gain, so reported endpoints always certify membership.
double refine_root(const ResourceModel& model, double neg_pt, double pos_pt) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (neg_pt + pos_pt);
    if (mid == neg_pt || mid == pos_pt) break;
    const double g = gain_or_neg(model, mid);
    if (g >= 0.0) {
      pos_pt = mid;
      if (g <= 1e-10) break;
    } else {
      neg_pt = mid;
    }
  }
  return pos_pt;
}

}  // namespace

std::vector<Interval> recovery_set_on(const ResourceModel& model, double lo,
                                      double hi, double grid_step) {
  if (grid_step <= 0.0) throw ConfigError("recovery_set: grid_step must be > 0");
  if (hi < lo) throw ConfigError("recovery_set: empty scan range");

  std::vector<Interval> out;
  if (hi == lo) {
    if (gain_or_neg(model, lo) >= 0.0) out.push_back({lo, lo});
    return out;
  }

  const int cells = std::max(1, static_cast<int>(std::ceil((hi - lo) / grid_step)));
  double prev_t = lo;
  bool open = gain_or_neg(model, lo) >= 0.0;
  double open_at = lo;

  for (int i = 1; i <= cells; ++i) {
    const double t = (i == cells) ? hi : lo + (hi - lo) * i / cells;
    const double g = gain_or_neg(model, t);
    if (!open && g >= 0.0) {
      open_at = refine_root(model, prev_t, t);
      open = true;
    } else if (open && g < 0.0) {
      out.push_back({open_at, refine_root(model, t, prev_t)});
      open = false;
    }
    prev_t = t;
  }
  if (open) out.push_back({open_at, hi});
  return out;
}

std::vector<Interval> recovery_set(const ResourceModel& model, double grid_step) {
  if (model.dt_max == model.dt_min) {
    std::vector<Interval> out;
    if (gain_or_neg(model, model.dt_min) >= 0.0)
      out.push_back({model.dt_min, model.dt_min});
    return out;
  }
  return recovery_set_on(model, model.dt_min, model.dt_max, grid_step);
}

AssumptionReport check_assumptions(const ResourceModel& model) {
  AssumptionReport report;

  const double mu0 = model.dt_min == 0.0 ? model.cost(0.0) : 0.0;
  report.a2_holds = (model.dt_min == 0.0 && mu0 > 0.0) || model.dt_min > 0.0;
  if (!report.a2_holds)
    report.notes += "a2: dt_min = 0 and cost(0) = 0 allows accumulation of zero-length intervals. ";

  // a3 scans [0, dt_max]; inverse_compute is singular at 0 but evaluates to
  // +inf there, which the scan treats as negative gain.
  if (model.dt_max > 0.0) {
    const auto d0 = recovery_set_on(model, 0.0, model.dt_max, 1e-3 * model.dt_max);
    report.a3_holds = !d0.empty();
  } else {
    report.a3_holds = gain_or_neg(model, 0.0) >= 0.0;
  }
  if (!report.a3_holds)
    report.notes +=
        "a3: no recovery interval in [0, dt_max]; intervals beyond dt_max, if any, "
        "are invisible to the scan. ";

  const double width = model.dt_max - model.dt_min;
  report.d_set = width > 0.0
                     ? recovery_set_on(model, model.dt_min, model.dt_max, 1e-3 * width)
                     : recovery_set(model, 1.0);
  report.a4_holds = !report.d_set.empty();
  if (report.a4_holds) {
    report.recovery_interval = report.d_set.front().lo;
  } else if (report.a3_holds) {
    report.notes += "a4: recovery intervals exist but none inside [dt_min, dt_max]. ";
  }
  return report;
}

}  // namespace stmpc
