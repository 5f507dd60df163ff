#include "stmpc/dynamics.hpp"

#include <cmath>
#include <sstream>

namespace stmpc {
namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

// RK4 on the state augmented with a running-cost coordinate. The cost
// coordinate shares the quadrature with the state so transition and cost
// carry the same discretization error. Scratch vectors are reused across
// substeps; this loop dominates every solve.
struct Rk4Scratch {
  Vec k1, k2, k3, k4, xt, xdev;
  explicit Rk4Scratch(int n) : k1(n), k2(n), k3(n), k4(n), xt(n), xdev(n) {}
};

SampledStep integrate(const PlantModel& model, const Vec& x, const Vec& u,
                      double dt, const IntegratorConfig& cfg,
                      TrajectorySegment* dense) {
  if (dt < 0.0) throw std::domain_error("propagate: negative interval");
  if (cfg.h_max <= 0.0) throw ConfigError("IntegratorConfig: h_max must be > 0");

  SampledStep out{x, 0.0};
  if (dense) {
    dense->times.clear();
    dense->states.clear();
    dense->times.push_back(0.0);
    dense->states.push_back(x);
  }
  if (dt == 0.0) return out;

  const int nsub = static_cast<int>(std::ceil(dt / cfg.h_max));
  const double h = dt / nsub;
  const Vec u_dev = u - model.u_ref;

  Rk4Scratch s(model.state_dim);
  Vec xc = x;
  double cost = 0.0;
  auto cost_at = [&](const Vec& state) {
    s.xdev = state;
    s.xdev -= model.x_ref;
    return model.deviation_cost(s.xdev, u_dev);
  };
  for (int i = 0; i < nsub; ++i) {
    model.vector_field(xc, u, s.k1);
    const double c1 = cost_at(xc);

    s.xt = xc;
    s.xt.noalias() += (0.5 * h) * s.k1;
    model.vector_field(s.xt, u, s.k2);
    const double c2 = cost_at(s.xt);

    s.xt = xc;
    s.xt.noalias() += (0.5 * h) * s.k2;
    model.vector_field(s.xt, u, s.k3);
    const double c3 = cost_at(s.xt);

    s.xt = xc;
    s.xt.noalias() += h * s.k3;
    model.vector_field(s.xt, u, s.k4);
    const double c4 = cost_at(s.xt);

    s.k1 += 2.0 * s.k2;
    s.k1 += 2.0 * s.k3;
    s.k1 += s.k4;
    xc.noalias() += (h / 6.0) * s.k1;
    cost += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4);

    if (!all_finite(xc) || !std::isfinite(cost)) {
      std::ostringstream msg;
      msg << "integration diverged at substep " << i + 1 << " of " << nsub
          << " (dt=" << dt << ")";
      throw DivergenceError(msg.str(), i + 1);
    }
    if (dense) {
      dense->times.push_back((i + 1) * h);
      dense->states.push_back(xc);
    }
  }
  // Land the final time exactly on dt.
  if (dense) dense->times.back() = dt;
  out.next_state = std::move(xc);
  out.accrued_cost = cost;
  return out;
}

}  // namespace

PlantModel PlantModel::with_reference(Vec new_x_ref, Vec new_u_ref) const {
  PlantModel m = *this;
  m.x_ref = std::move(new_x_ref);
  m.u_ref = std::move(new_u_ref);
  return m;
}

void validate_plant(const PlantModel& model) {
  if (model.state_dim <= 0 || model.input_dim <= 0)
    throw ConfigError("plant: dimensions must be positive");
  if (!model.vector_field || !model.deviation_cost)
    throw ConfigError("plant: vector field and cost must be set");
  auto expect_dim = [&](const Vec& v, int n, const char* name) {
    if (v.size() != n) throw ConfigError(std::string("plant: bad size for ") + name);
  };
  expect_dim(model.input_lower, model.input_dim, "input_lower");
  expect_dim(model.input_upper, model.input_dim, "input_upper");
  expect_dim(model.x_ref, model.state_dim, "x_ref");
  expect_dim(model.u_ref, model.input_dim, "u_ref");
  for (int j = 0; j < model.input_dim; ++j) {
    if (!(model.input_lower[j] <= model.input_upper[j]))
      throw ConfigError("plant: input_lower > input_upper");
    if (model.u_ref[j] < model.input_lower[j] - 1e-12 ||
        model.u_ref[j] > model.input_upper[j] + 1e-12)
      throw ConfigError("plant: u_ref outside the input box");
  }
  if (model.sample_state_lower.has_value() != model.sample_state_upper.has_value())
    throw ConfigError("plant: state box needs both bounds");
  if (model.sample_state_lower) {
    expect_dim(*model.sample_state_lower, model.state_dim, "sample_state_lower");
    expect_dim(*model.sample_state_upper, model.state_dim, "sample_state_upper");
    for (int j = 0; j < model.state_dim; ++j)
      if (!((*model.sample_state_lower)[j] <= (*model.sample_state_upper)[j]))
        throw ConfigError("plant: state box lower > upper");
  }

  Vec dx(model.state_dim);
  model.vector_field(model.x_ref, model.u_ref, dx);
  if (dx.lpNorm<Eigen::Infinity>() > 1e-10)
    throw ConfigError("plant: reference pair is not an equilibrium of f");

  const double c0 = model.deviation_cost(Vec::Zero(model.state_dim),
                                         Vec::Zero(model.input_dim));
  if (c0 != 0.0)
    throw ConfigError("plant: stage cost must vanish at the reference");

  // Positive-definiteness spot check on a deterministic grid around the
  // reference: axis-aligned offsets plus mixed points.
  const double offsets[] = {-1.0, -0.1, 0.1, 1.0};
  Vec ex = Vec::Zero(model.state_dim);
  Vec eu = Vec::Zero(model.input_dim);
  for (int j = 0; j < model.state_dim; ++j) {
    for (double o : offsets) {
      ex.setZero();
      ex[j] = o;
      if (model.deviation_cost(ex, Vec::Zero(model.input_dim)) <= 0.0)
        throw ConfigError("plant: stage cost not positive away from the reference (state)");
    }
  }
  for (int j = 0; j < model.input_dim; ++j) {
    for (double o : offsets) {
      eu.setZero();
      eu[j] = o;
      if (model.deviation_cost(Vec::Zero(model.state_dim), eu) <= 0.0)
        throw ConfigError("plant: stage cost not positive away from the reference (input)");
    }
  }
  ex.setConstant(0.3);
  eu.setConstant(-0.2);
  if (model.deviation_cost(ex, eu) <= 0.0)
    throw ConfigError("plant: stage cost not positive away from the reference (mixed)");
}

SampledStep propagate(const PlantModel& model, const Vec& x, const Vec& u,
                      double dt, const IntegratorConfig& cfg) {
  for (int j = 0; j < model.input_dim; ++j) {
    if (u[j] < model.input_lower[j] - 1e-12 || u[j] > model.input_upper[j] + 1e-12)
      throw ConfigError("propagate: input outside the input box");
  }
  return integrate(model, x, u, dt, cfg, nullptr);
}

SampledStep propagate_free(const PlantModel& model, const Vec& x, const Vec& u,
                           double dt, const IntegratorConfig& cfg) {
  return integrate(model, x, u, dt, cfg, nullptr);
}

double zero_cost_check(const PlantModel& model, double dt,
                       const IntegratorConfig& cfg) {
  return integrate(model, model.x_ref, model.u_ref, dt, cfg, nullptr).accrued_cost;
}

TrajectorySegment apply_zoh(const PlantModel& model, const Vec& x, const Vec& u,
                            double dt, const IntegratorConfig& cfg) {
  TrajectorySegment seg;
  integrate(model, x, u, dt, cfg, &seg);
  return seg;
}

namespace {

// Integral over [0, dt] of the square of a + b t + c t^2.
double integral_of_square(double a, double b, double c, double dt) {
  const double p0 = a * a;
  const double p1 = 2.0 * a * b;
  const double p2 = b * b + 2.0 * a * c;
  const double p3 = 2.0 * b * c;
  const double p4 = c * c;
  double acc = 0.0;
  double pw = dt;
  acc += p0 * pw;
  pw *= dt;
  acc += p1 * pw / 2.0;
  pw *= dt;
  acc += p2 * pw / 3.0;
  pw *= dt;
  acc += p3 * pw / 4.0;
  pw *= dt;
  acc += p4 * pw / 5.0;
  return acc;
}

}  // namespace

SampledStep oracle_double_integrator(const Vec& x, double u, double dt,
                                     const Vec& x_ref, double u_ref, double q1,
                                     double q2, double ru) {
  if (dt < 0.0) throw std::domain_error("oracle: negative interval");
  SampledStep out;
  out.next_state = Vec(2);
  out.next_state[0] = x[0] + dt * x[1] + 0.5 * dt * dt * u;
  out.next_state[1] = x[1] + dt * u;
  // Deviations evolve as e1(t) = e1 + e2 t + u t^2/2, e2(t) = e2 + u t for
  // x_ref with zero second component and u_ref = 0; for general references
  // the deviation input is u - u_ref and e2' = u (still exact as long as
  // (x_ref, u_ref) is an equilibrium, i.e. x_ref[1] = 0 and u_ref = 0).
  const double e1 = x[0] - x_ref[0];
  const double e2 = x[1] - x_ref[1];
  const double du = u - u_ref;
  out.accrued_cost = q1 * integral_of_square(e1, e2, 0.5 * u, dt) +
                     q2 * integral_of_square(e2, u, 0.0, dt) +
                     ru * du * du * dt;
  return out;
}

SampledStep oracle_double_integrator(const Vec& x, double u, double dt) {
  return oracle_double_integrator(x, u, dt, Vec::Zero(2), 0.0);
}

}  // namespace stmpc
