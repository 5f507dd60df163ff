#include "stmpc/solver.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <ostream>

namespace stmpc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPenaltyMax = 1e12;
}  // namespace

void validate_config(const SolverConfig& cfg) {
  if (cfg.outer_iters_max <= 0 || cfg.inner_iters_max <= 0)
    throw ConfigError("solver: iteration limits must be positive");
  if (cfg.penalty_init <= 0.0) throw ConfigError("solver: penalty_init must be > 0");
  if (cfg.penalty_growth <= 1.0) throw ConfigError("solver: penalty_growth must be > 1");
  if (cfg.constraint_tol <= 0.0 || cfg.stationarity_tol <= 0.0 ||
      cfg.exact_resource_tol <= 0.0 || cfg.fd_step_rel <= 0.0 ||
      cfg.multiplier_cap <= 0.0)
    throw ConfigError("solver: tolerances must be positive");
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters_feasible: return "max_iters_feasible";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::diverged: return "diverged";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Generic finite differences
// ---------------------------------------------------------------------------

FdDerivatives fd_derivatives(const Nlp& nlp, const Vec& z, double fd_step_rel) {
  FdDerivatives out;
  out.objective_gradient = Vec::Zero(nlp.dim);
  out.eq_jacobian = Mat::Zero(nlp.num_eq, nlp.dim);
  out.ineq_jacobian = Mat::Zero(nlp.num_ineq, nlp.dim);

  Vec zp = z;
  double fa, fb;
  Vec ea(nlp.num_eq), eb(nlp.num_eq), ia(nlp.num_ineq), ib(nlp.num_ineq);
  for (int c = 0; c < nlp.dim; ++c) {
    const double h = fd_step_rel * std::max(1.0, std::abs(z[c]));
    const double za = z[c] - h;
    const double zb = z[c] + h;
    zp[c] = za;
    nlp.eval(zp, fa, ea, ia);
    zp[c] = zb;
    nlp.eval(zp, fb, eb, ib);
    zp[c] = z[c];
    const double inv = 1.0 / (zb - za);
    out.objective_gradient[c] = (fb - fa) * inv;
    if (nlp.num_eq) out.eq_jacobian.col(c) = (eb - ea) * inv;
    if (nlp.num_ineq) out.ineq_jacobian.col(c) = (ib - ia) * inv;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian with projected quasi-Newton inner iterations
// ---------------------------------------------------------------------------

namespace {

Vec project(const Nlp& nlp, Vec z) {
  for (int i = 0; i < nlp.dim; ++i)
    z[i] = std::min(std::max(z[i], nlp.lower[i]), nlp.upper[i]);
  return z;
}

// Powell-Hestenes-Rockafellar merit; bounds are handled by projection.
double merit_value(const Vec& eq, const Vec& ineq, double f, const Vec& leq,
                   const Vec& lin, double rho) {
  double v = f;
  for (int i = 0; i < eq.size(); ++i)
    v += leq[i] * eq[i] + 0.5 * rho * eq[i] * eq[i];
  for (int i = 0; i < ineq.size(); ++i) {
    const double t = std::max(0.0, lin[i] + rho * ineq[i]);
    v += (t * t - lin[i] * lin[i]) / (2.0 * rho);
  }
  return v;
}

Vec merit_gradient(const Vec& grad_f, const Mat& jac_eq, const Mat& jac_ineq,
                   const Vec& eq, const Vec& ineq, const Vec& leq,
                   const Vec& lin, double rho) {
  Vec g = grad_f;
  if (eq.size()) g.noalias() += jac_eq.transpose() * (leq + rho * eq);
  if (ineq.size()) {
    Vec t = (lin + rho * ineq).cwiseMax(0.0);
    g.noalias() += jac_ineq.transpose() * t;
  }
  return g;
}

double projected_gradient_norm(const Nlp& nlp, const Vec& z, const Vec& g) {
  double norm = 0.0;
  for (int i = 0; i < nlp.dim; ++i) {
    const double step =
        std::min(std::max(z[i] - g[i], nlp.lower[i]), nlp.upper[i]) - z[i];
    norm = std::max(norm, std::abs(step));
  }
  return norm;
}

// Damped BFGS model of the objective curvature, kept across outer iterations.
struct BfgsModel {
  Mat B;
  explicit BfgsModel(int dim) : B(Mat::Identity(dim, dim)) {}
  void update(const Vec& s, const Vec& y) {
    const double sBs = s.dot(B * s);
    if (!(sBs > 1e-14)) return;
    const double sy = s.dot(y);
    Vec yt = y;
    if (sy < 0.2 * sBs) {
      const double theta = 0.8 * sBs / (sBs - sy);
      yt = theta * y + (1.0 - theta) * (B * s);
    }
    const double syt = s.dot(yt);
    if (!(syt > 1e-14)) return;
    const Vec Bs = B * s;
    B.noalias() -= (Bs * Bs.transpose()) / sBs;
    B.noalias() += (yt * yt.transpose()) / syt;
  }
};

struct InnerPoint {
  double f = 0.0;
  Vec eq, ineq;
  double merit = kInf;
  Vec grad_f;
  Mat jac_eq, jac_ineq;
  Vec grad;  // merit gradient
};

}  // namespace

AlmResult alm_minimize(const Nlp& nlp, const Vec& z0, const SolverConfig& cfg,
                       const AlmWarm* warm) {
  validate_config(cfg);
  if (z0.size() != nlp.dim) throw ConfigError("alm_minimize: z0 has the wrong size");
  if (!nlp.eval) throw ConfigError("alm_minimize: nlp.eval is empty");

  auto violation = [&](const Vec& z, const Vec& eq, const Vec& ineq) {
    if (nlp.feasibility_violation) return nlp.feasibility_violation(z, eq, ineq, cfg);
    double v = 0.0;
    for (int i = 0; i < eq.size(); ++i) v = std::max(v, std::abs(eq[i]));
    for (int i = 0; i < ineq.size(); ++i) v = std::max(v, ineq[i]);
    return v;
  };
  auto accepted_feasible = [&](const Vec& z, const Vec& eq, const Vec& ineq) {
    if (nlp.accept_feasible) return nlp.accept_feasible(z, eq, ineq, cfg);
    return violation(z, eq, ineq) <= cfg.constraint_tol;
  };
  auto derivs = [&](const Vec& z, Vec& gf, Mat& je, Mat& ji) {
    if (nlp.derivatives) {
      nlp.derivatives(z, cfg, gf, je, ji);
    } else {
      FdDerivatives d = fd_derivatives(nlp, z, cfg.fd_step_rel);
      gf = std::move(d.objective_gradient);
      je = std::move(d.eq_jacobian);
      ji = std::move(d.ineq_jacobian);
    }
  };

  AlmResult res;
  res.z = project(nlp, z0);
  res.eq_multipliers = Vec::Zero(nlp.num_eq);
  res.ineq_multipliers = Vec::Zero(nlp.num_ineq);
  double rho = cfg.penalty_init;
  if (warm) {
    if (warm->eq_multipliers.size() == nlp.num_eq)
      res.eq_multipliers = warm->eq_multipliers;
    if (warm->ineq_multipliers.size() == nlp.num_ineq)
      res.ineq_multipliers = warm->ineq_multipliers.cwiseMax(0.0);
    if (warm->penalty > 0.0)
      rho = std::clamp(warm->penalty, cfg.penalty_init, 1e6);
  }

  InnerPoint pt;
  pt.eq = Vec(nlp.num_eq);
  pt.ineq = Vec(nlp.num_ineq);
  nlp.eval(res.z, pt.f, pt.eq, pt.ineq);
  if (!std::isfinite(pt.f) || !pt.eq.allFinite() || !pt.ineq.allFinite()) {
    res.status = SolveStatus::diverged;
    res.objective = pt.f;
    return res;
  }
  derivs(res.z, pt.grad_f, pt.jac_eq, pt.jac_ineq);

  BfgsModel model(nlp.dim);
  double omega = std::max(cfg.stationarity_tol, 1e-2);
  double v_prev = kInf;
  int feasible_stalls = 0;
  int saturated_outers = 0;

  for (int outer = 0; outer < cfg.outer_iters_max; ++outer) {
    res.outer_iterations = outer + 1;
    pt.merit = merit_value(pt.eq, pt.ineq, pt.f, res.eq_multipliers,
                           res.ineq_multipliers, rho);
    if (!std::isfinite(pt.merit)) {
      res.status = SolveStatus::diverged;
      break;
    }
    pt.grad = merit_gradient(pt.grad_f, pt.jac_eq, pt.jac_ineq, pt.eq, pt.ineq,
                             res.eq_multipliers, res.ineq_multipliers, rho);
    res.merit_start.push_back(pt.merit);

    // ---- inner projected quasi-Newton loop ----
    double pg = projected_gradient_norm(nlp, res.z, pt.grad);
    bool stalled = false;
    int tiny_steps = 0;  // consecutive accepted steps with negligible progress
    for (int it = 0; it < cfg.inner_iters_max && pg > omega; ++it) {
      ++res.inner_iterations;
      const double merit_before = pt.merit;

      // Two-metric projection: Newton step on the free coordinates of the
      // Gauss-Newton model, steepest descent on the bound-active ones.
      std::vector<int> free_idx;
      free_idx.reserve(nlp.dim);
      for (int i = 0; i < nlp.dim; ++i) {
        const bool at_lo = res.z[i] <= nlp.lower[i] && pt.grad[i] > 0.0;
        const bool at_hi = res.z[i] >= nlp.upper[i] && pt.grad[i] < 0.0;
        if (!at_lo && !at_hi) free_idx.push_back(i);
      }
      Vec d = Vec::Zero(nlp.dim);
      const int nf = static_cast<int>(free_idx.size());
      if (nf > 0) {
        Mat H(nf, nf);
        for (int a = 0; a < nf; ++a)
          for (int b = 0; b <= a; ++b) H(a, b) = model.B(free_idx[a], free_idx[b]);
        auto add_gn = [&](const Mat& jac, int row, double weight) {
          for (int a = 0; a < nf; ++a) {
            const double ja = jac(row, free_idx[a]);
            if (ja == 0.0) continue;
            for (int b = 0; b <= a; ++b)
              H(a, b) += weight * ja * jac(row, free_idx[b]);
          }
        };
        for (int r = 0; r < nlp.num_eq; ++r) add_gn(pt.jac_eq, r, rho);
        for (int r = 0; r < nlp.num_ineq; ++r)
          if (res.ineq_multipliers[r] + rho * pt.ineq[r] > 0.0)
            add_gn(pt.jac_ineq, r, rho);
        for (int a = 0; a < nf; ++a) H(a, a) += 1e-10 * (1.0 + H(a, a));
        Vec gF(nf);
        for (int a = 0; a < nf; ++a) gF[a] = pt.grad[free_idx[a]];
        const Vec dF = H.selfadjointView<Eigen::Lower>().ldlt().solve(-gF);
        if (dF.allFinite())
          for (int a = 0; a < nf; ++a) d[free_idx[a]] = dF[a];
      }
      for (int i = 0; i < nlp.dim; ++i)
        if (d[i] == 0.0 && std::find(free_idx.begin(), free_idx.end(), i) ==
                               free_idx.end())
          d[i] = -pt.grad[i];

      bool accepted = false;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
        if (attempt == 1) d = -pt.grad;
        double alpha = 1.0;
        for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
          Vec zt = project(nlp, res.z + alpha * d);
          Vec dz = zt - res.z;
          const double pred = pt.grad.dot(dz);
          if (pred >= 0.0 || dz.lpNorm<Eigen::Infinity>() == 0.0) continue;
          double ft;
          Vec eqt(nlp.num_eq), ineqt(nlp.num_ineq);
          nlp.eval(zt, ft, eqt, ineqt);
          if (!std::isfinite(ft) || !eqt.allFinite() || !ineqt.allFinite()) continue;
          const double mt = merit_value(eqt, ineqt, ft, res.eq_multipliers,
                                        res.ineq_multipliers, rho);
          if (!std::isfinite(mt)) continue;
          if (mt <= pt.merit + 1e-4 * pred) {
            Vec gf_new;
            Mat je_new, ji_new;
            derivs(zt, gf_new, je_new, ji_new);
            model.update(dz, gf_new - pt.grad_f);
            res.z = std::move(zt);
            pt.f = ft;
            pt.eq = std::move(eqt);
            pt.ineq = std::move(ineqt);
            pt.merit = mt;
            pt.grad_f = std::move(gf_new);
            pt.jac_eq = std::move(je_new);
            pt.jac_ineq = std::move(ji_new);
            pt.grad = merit_gradient(pt.grad_f, pt.jac_eq, pt.jac_ineq, pt.eq,
                                     pt.ineq, res.eq_multipliers,
                                     res.ineq_multipliers, rho);
            accepted = true;
            break;
          }
        }
      }
      if (!accepted) {
        stalled = true;
        break;
      }
      if (merit_before - pt.merit <= 1e-10 * std::max(1.0, std::abs(pt.merit))) {
        if (++tiny_steps >= 3) {
          stalled = true;
          break;
        }
      } else {
        tiny_steps = 0;
      }
      pg = projected_gradient_norm(nlp, res.z, pt.grad);
    }

    res.merit_end.push_back(pt.merit);
    res.objective_history.push_back(pt.f);
    const double v = violation(res.z, pt.eq, pt.ineq);
    const bool ok = accepted_feasible(res.z, pt.eq, pt.ineq);
    res.feasibility = v;
    res.stationarity = pg;
    if (cfg.trace)
      *cfg.trace << outer << ',' << res.inner_iterations << ',' << pt.f << ','
                 << v << ',' << pg << ',' << rho << '\n';

    if (ok && pg <= cfg.stationarity_tol) {
      res.status = SolveStatus::converged;
      break;
    }
    // A feasible point the inner solver cannot improve at this noise level:
    // stop once the objective stops moving as well.
    const double f_prev = res.objective_history.size() >= 2
                              ? res.objective_history[res.objective_history.size() - 2]
                              : kInf;
    const bool f_stagnant =
        std::abs(f_prev - pt.f) <= 1e-9 * std::max(1.0, std::abs(pt.f));
    if (ok && (stalled || f_stagnant) && ++feasible_stalls >= 2) break;
    if (!(ok && (stalled || f_stagnant))) feasible_stalls = 0;

    // First-order multiplier update every outer iteration, clamped; the
    // penalty grows only when the infeasibility failed to halve.
    for (int i = 0; i < nlp.num_eq; ++i)
      res.eq_multipliers[i] =
          std::clamp(res.eq_multipliers[i] + rho * pt.eq[i],
                     -cfg.multiplier_cap, cfg.multiplier_cap);
    for (int i = 0; i < nlp.num_ineq; ++i)
      res.ineq_multipliers[i] =
          std::min(std::max(0.0, res.ineq_multipliers[i] + rho * pt.ineq[i]),
                   cfg.multiplier_cap);
    // Below constraint_tol the multiplier iteration alone contracts the
    // violation; growing the penalty there only stiffens the subproblems.
    if (!ok && v > 0.5 * v_prev && v > cfg.constraint_tol) {
      rho = std::min(rho * cfg.penalty_growth, kPenaltyMax);
      if (rho >= kPenaltyMax && ++saturated_outers >= 3) break;
    }
    v_prev = v;
    omega = std::max(cfg.stationarity_tol, 0.3 * omega);
  }

  if (res.status != SolveStatus::converged && res.status != SolveStatus::diverged)
    res.status = accepted_feasible(res.z, pt.eq, pt.ineq)
                     ? SolveStatus::max_iters_feasible
                     : SolveStatus::infeasible;
  res.objective = pt.f;
  res.eq = pt.eq;
  res.ineq = pt.ineq;
  res.penalty = rho;
  return res;
}

// ---------------------------------------------------------------------------
// OCP transcription to the NLP
// ---------------------------------------------------------------------------

namespace {

// Rollout cache keyed by the exact bytes of (inputs, intervals); perturbing a
// resource coordinate leaves the key unchanged and reuses the integration.
struct RolloutCache {
  struct Entry {
    std::vector<double> key;
    RolloutResult value;
  };
  std::vector<Entry> entries;  // tiny LRU, newest last
  const OcpInstance* inst = nullptr;

  static std::vector<double> key_of(const OcpInstance& inst, const Vec& z) {
    const int nd = inst.plant.input_dim * inst.horizon + inst.horizon;
    return {z.data(), z.data() + nd};
  }

  const RolloutResult& get(const Vec& z) {
    std::vector<double> key = key_of(*inst, z);
    for (size_t i = entries.size(); i-- > 0;) {
      if (entries[i].key.size() == key.size() &&
          std::memcmp(entries[i].key.data(), key.data(),
                      key.size() * sizeof(double)) == 0) {
        if (i + 1 != entries.size())
          std::rotate(entries.begin() + i, entries.begin() + i + 1, entries.end());
        return entries.back().value;
      }
    }
    Entry e;
    e.key = std::move(key);
    e.value = rollout(*inst, unpack_decision(*inst, z));
    if (entries.size() >= 4) entries.erase(entries.begin());
    entries.push_back(std::move(e));
    return entries.back().value;
  }
};

int state_box_rows(const OcpInstance& inst) {
  return (inst.enforce_sample_state_box && inst.plant.sample_state_lower)
             ? 2 * inst.plant.state_dim * inst.horizon
             : 0;
}

void fill_state_box(const OcpInstance& inst, const Mat& states, int offset, Vec& ineq) {
  const int n = inst.plant.state_dim;
  for (int i = 0; i < inst.horizon; ++i)
    for (int j = 0; j < n; ++j) {
      ineq[offset + 2 * (i * n + j)] =
          (*inst.plant.sample_state_lower)[j] - states(j, i);
      ineq[offset + 2 * (i * n + j) + 1] =
          states(j, i) - (*inst.plant.sample_state_upper)[j];
    }
}

}  // namespace

int ocp_nlp_dim(const OcpInstance& inst) {
  return inst.plant.input_dim * inst.horizon + 2 * inst.horizon;
}

Vec pack_decision(const OcpInstance& inst, const DecisionVector& d) {
  const int N = inst.horizon;
  const int m = inst.plant.input_dim;
  if (d.inputs.rows() != m || d.inputs.cols() != N || d.intervals.size() != N)
    throw ConfigError("pack_decision: decision shape does not match the instance");
  Vec z = Vec::Zero(ocp_nlp_dim(inst));
  for (int i = 0; i < N; ++i) z.segment(i * m, m) = d.inputs.col(i);
  z.segment(N * m, N) = d.intervals;
  return z;
}

DecisionVector unpack_decision(const OcpInstance& inst, const Vec& z) {
  const int N = inst.horizon;
  const int m = inst.plant.input_dim;
  DecisionVector d = make_decision(m, N);
  for (int i = 0; i < N; ++i) d.inputs.col(i) = z.segment(i * m, m);
  d.intervals = z.segment(N * m, N);
  return d;
}

Nlp make_ocp_nlp(const OcpInstance& inst) {
  validate_instance(inst);
  const int N = inst.horizon;
  const int m = inst.plant.input_dim;
  const int nu = N * m;
  const int sbox = state_box_rows(inst);
  const bool terminal = inst.terminal_mode == TerminalMode::equality_to_reference;

  Nlp nlp;
  nlp.dim = ocp_nlp_dim(inst);
  nlp.num_eq = terminal ? inst.plant.state_dim : 0;
  nlp.num_ineq = N + sbox;
  nlp.lower = Vec(nlp.dim);
  nlp.upper = Vec(nlp.dim);
  for (int i = 0; i < N; ++i) {
    nlp.lower.segment(i * m, m) = inst.plant.input_lower;
    nlp.upper.segment(i * m, m) = inst.plant.input_upper;
  }
  nlp.lower.segment(nu, N).setConstant(inst.resource.dt_min);
  nlp.upper.segment(nu, N).setConstant(inst.resource.dt_max);
  nlp.lower.segment(nu + N, N).setConstant(0.0);
  nlp.upper.segment(nu + N, N).setConstant(inst.resource.capacity);

  auto inst_ptr = std::make_shared<OcpInstance>(inst);
  auto cache = std::make_shared<RolloutCache>();
  cache->inst = inst_ptr.get();

  nlp.eval = [inst_ptr, cache, N, nu, terminal, sbox](const Vec& z, double& f,
                                                      Vec& eq, Vec& ineq) {
    const OcpInstance& in = *inst_ptr;
    eq.resize(terminal ? in.plant.state_dim : 0);
    ineq.resize(N + sbox);
    try {
      const RolloutResult& ro = cache->get(z);
      f = ro.objective;
      if (terminal) eq = ro.states.col(N) - in.plant.x_ref;
      double r_prev = in.initial_resource;
      for (int i = 0; i < N; ++i) {
        const double r_next = z[nu + N + i];
        ineq[i] = r_next - r_prev - in.resource.gain(z[nu + i]);
        r_prev = r_next;
      }
      if (sbox) fill_state_box(in, ro.states, N, ineq);
    } catch (const DivergenceError&) {
      f = kInf;
      eq.setZero();
      ineq.setZero();
    }
  };

  nlp.accept_feasible = [inst_ptr, cache, N, sbox](const Vec& z, const Vec& eq,
                                                   const Vec& ineq,
                                                   const SolverConfig& cfg) {
    const OcpInstance& in = *inst_ptr;
    for (int i = 0; i < eq.size(); ++i)
      if (std::abs(eq[i]) > cfg.constraint_tol) return false;
    for (int i = N; i < N + sbox; ++i)
      if (ineq[i] > cfg.constraint_tol) return false;
    // The relaxed rows are implied by nonnegativity of the exact rollout.
    // The applied prefix is held to the tight tolerance (its intervals get
    // polished and its exactness bounds the closed-loop value drift); later
    // stages are re-solved before application and only need constraint_tol.
    const RolloutResult& ro = cache->get(z);
    for (int i = 0; i <= N; ++i) {
      const double tol = i <= in.multi_step ? cfg.exact_resource_tol
                                            : std::max(cfg.exact_resource_tol,
                                                       cfg.constraint_tol);
      if (ro.resources[i] < -tol) return false;
    }
    return true;
  };

  nlp.feasibility_violation = [inst_ptr, cache, N, sbox](const Vec& z, const Vec& eq,
                                                         const Vec& ineq,
                                                         const SolverConfig&) {
    double v = 0.0;
    for (int i = 0; i < eq.size(); ++i) v = std::max(v, std::abs(eq[i]));
    for (int i = 0; i < N + sbox; ++i) v = std::max(v, ineq[i]);
    const RolloutResult& ro = cache->get(z);
    for (int i = 0; i <= N; ++i) v = std::max(v, -ro.resources[i]);
    return v;
  };

  nlp.derivatives = [inst_ptr, cache, N, m, nu, terminal, sbox](
                        const Vec& z, const SolverConfig& cfg, Vec& grad_f,
                        Mat& jac_eq, Mat& jac_ineq) {
    const OcpInstance& in = *inst_ptr;
    const int n = in.plant.state_dim;
    const int dim = static_cast<int>(z.size());
    grad_f = Vec::Zero(dim);
    jac_eq = Mat::Zero(terminal ? n : 0, dim);
    jac_ineq = Mat::Zero(N + sbox, dim);

    const RolloutResult base = cache->get(z);
    // Prefix sums of stage costs; perturbing stage s re-integrates s..N-1 only.
    Vec prefix = Vec::Zero(N + 1);
    for (int i = 0; i < N; ++i) prefix[i + 1] = prefix[i] + base.stage_costs[i];

    DecisionVector d = unpack_decision(in, z);
    Mat states_a(n, N + 1), states_b(n, N + 1);
    auto suffix_eval = [&](int s, double& obj, Mat& states_out) {
      Vec x = base.states.col(s);
      obj = prefix[s];
      for (int i = s; i < N; ++i) {
        const SampledStep step = propagate_free(in.plant, x, d.inputs.col(i),
                                                d.intervals[i], in.integrator);
        x = step.next_state;
        obj += step.accrued_cost;
        states_out.col(i + 1) = x;
      }
    };

    auto fd_structured = [&](int coord, int stage, double za, double zb,
                             double* slot) {
      const double keep = *slot;
      double fa, fb;
      *slot = za;
      suffix_eval(stage, fa, states_a);
      *slot = zb;
      suffix_eval(stage, fb, states_b);
      *slot = keep;
      const double inv = 1.0 / (zb - za);
      grad_f[coord] = (fb - fa) * inv;
      if (terminal)
        jac_eq.col(coord) = (states_b.col(N) - states_a.col(N)) * inv;
      if (sbox)
        for (int i = stage + 1; i < N; ++i)
          for (int j = 0; j < n; ++j) {
            const double dx = (states_b(j, i) - states_a(j, i)) * inv;
            jac_ineq(N + 2 * (i * n + j), coord) = -dx;
            jac_ineq(N + 2 * (i * n + j) + 1, coord) = dx;
          }
    };

    for (int s = 0; s < N; ++s) {
      for (int j = 0; j < m; ++j) {
        const int c = s * m + j;
        const double h = cfg.fd_step_rel * std::max(1.0, std::abs(z[c]));
        fd_structured(c, s, z[c] - h, z[c] + h, &d.inputs(j, s));
      }
      {
        const int c = nu + s;
        const double h = cfg.fd_step_rel * std::max(1.0, std::abs(z[c]));
        // Intervals must stay nonnegative for the integrator.
        const double za = std::max(0.0, z[c] - h);
        const double zb = z[c] + h;
        fd_structured(c, s, za, zb, &d.intervals[s]);
        jac_ineq(s, c) =
            -(in.resource.gain(zb) - in.resource.gain(za)) / (zb - za);
      }
    }
    // Resource coordinates: linear rows r_{i+1} - r_i - gain(dt_i).
    for (int i = 0; i < N; ++i) {
      jac_ineq(i, nu + N + i) = 1.0;
      if (i + 1 < N) jac_ineq(i + 1, nu + N + i) = -1.0;
    }
  };

  return nlp;
}

FdDerivatives gradient(const OcpInstance& inst, const DecisionVector& d,
                       double fd_step_rel) {
  const RolloutResult ro = rollout(inst, d);
  Vec z = pack_decision(inst, d);
  const int nu = inst.plant.input_dim * inst.horizon;
  z.segment(nu + inst.horizon, inst.horizon) = ro.resources.tail(inst.horizon);
  Nlp nlp = make_ocp_nlp(inst);
  SolverConfig cfg;
  cfg.fd_step_rel = fd_step_rel;
  FdDerivatives out;
  nlp.derivatives(z, cfg, out.objective_gradient, out.eq_jacobian, out.ineq_jacobian);
  return out;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

namespace {

Vec seed_resource_vars(const OcpInstance& inst, const DecisionVector& d) {
  Vec z = pack_decision(inst, d);
  const int nu = inst.plant.input_dim * inst.horizon;
  try {
    const RolloutResult ro = rollout(inst, d);
    for (int i = 0; i < inst.horizon; ++i)
      z[nu + inst.horizon + i] =
          std::clamp(ro.resources[i + 1], 0.0, inst.resource.capacity);
  } catch (const DivergenceError&) {
    // Leave the resource seeds at zero; the loop reports the divergence.
  }
  return z;
}

// Cold-start guesses: idle at the recovery interval, plus spend-then-recover
// ladders (short intervals early until the store would drain, recovery
// intervals after). The transient optimum typically front-loads spending, and
// a single basin of attraction is not guaranteed.
std::vector<DecisionVector> cold_start_guesses(const OcpInstance& inst) {
  const AssumptionReport rep = check_assumptions(inst.resource);
  const double dtr = rep.recovery_interval
                         ? *rep.recovery_interval
                         : 0.5 * (inst.resource.dt_min + inst.resource.dt_max);
  std::vector<DecisionVector> guesses;
  guesses.push_back(reference_candidate(inst, dtr));
  if (rep.recovery_interval) {
    std::vector<std::pair<double, int>> seen;
    for (double frac : {0.35, 0.5, 0.6, 0.7}) {
      const double dte = std::max(inst.resource.dt_min, frac * dtr);
      const double burn = -inst.resource.gain(dte);
      if (dte >= dtr || burn <= 0.0) continue;
      const int spend_stages = std::clamp(
          static_cast<int>(std::floor(inst.initial_resource / burn)), 1,
          inst.horizon);
      if (std::find(seen.begin(), seen.end(), std::pair{dte, spend_stages}) !=
          seen.end())
        continue;
      seen.emplace_back(dte, spend_stages);
      DecisionVector d = reference_candidate(inst, dtr);
      d.intervals.head(spend_stages).setConstant(dte);
      guesses.push_back(std::move(d));
    }
  }
  return guesses;
}

}  // namespace

SolveOutcome solve(const OcpInstance& inst,
                   const std::optional<DecisionVector>& warm,
                   const SolverConfig& cfg, const AlmWarm* warm_multipliers) {
  validate_config(cfg);
  validate_instance(inst);

  Nlp nlp = make_ocp_nlp(inst);
  AlmResult alm;
  if (warm) {
    alm = alm_minimize(nlp, seed_resource_vars(inst, *warm), cfg, warm_multipliers);
  } else {
    // Deterministic multi-start; best accepted objective wins, earlier
    // guesses break ties. The objective differences between basins are small
    // but systematic, so every guess gets the full budget.
    bool have = false;
    for (const DecisionVector& guess : cold_start_guesses(inst)) {
      AlmResult r = alm_minimize(nlp, seed_resource_vars(inst, guess), cfg,
                                 warm_multipliers);
      const bool r_ok = r.status == SolveStatus::converged ||
                        r.status == SolveStatus::max_iters_feasible;
      const bool best_ok = have && (alm.status == SolveStatus::converged ||
                                    alm.status == SolveStatus::max_iters_feasible);
      if (!have || (r_ok && !best_ok) ||
          (r_ok == best_ok && r.objective < alm.objective))
        alm = std::move(r), have = true;
    }
  }

  SolveOutcome out;
  out.status = alm.status;
  out.outer_iterations = alm.outer_iterations;
  out.inner_iterations = alm.inner_iterations;
  out.objective_history = std::move(alm.objective_history);
  out.merit_start = std::move(alm.merit_start);
  out.merit_end = std::move(alm.merit_end);
  out.eq_multipliers = std::move(alm.eq_multipliers);
  out.ineq_multipliers = std::move(alm.ineq_multipliers);
  out.penalty = alm.penalty;

  OcpSolution sol;
  sol.decision = unpack_decision(inst, alm.z);
  try {
    const RolloutResult ro = rollout(inst, sol.decision);
    sol.states = ro.states;
    sol.resources = ro.resources;
    sol.value = ro.objective;
    sol.feasibility_residual = residuals(inst, sol.decision).max_violation();
  } catch (const DivergenceError&) {
    out.status = SolveStatus::diverged;
    sol.value = kInf;
    sol.feasibility_residual = kInf;
  }
  sol.kkt_residual = alm.stationarity;

  // A feasible warm start bounds the optimum from above; never report a worse
  // point than it, and never report an infeasible point while holding a
  // feasible one (the inner solver may wander off a flat valley and stall).
  if (warm && out.status != SolveStatus::diverged) {
    try {
      const RolloutResult ro = rollout(inst, *warm);
      const double feas = residuals(inst, *warm).max_violation();
      const bool warm_feasible = feas <= cfg.constraint_tol &&
                                 ro.resources.minCoeff() >= -cfg.exact_resource_tol;
      const bool take = warm_feasible && (ro.objective < sol.value ||
                                          out.status == SolveStatus::infeasible);
      if (take) {
        sol.decision = *warm;
        sol.states = ro.states;
        sol.resources = ro.resources;
        sol.value = ro.objective;
        sol.feasibility_residual = feas;
        if (out.status == SolveStatus::infeasible)
          out.status = SolveStatus::max_iters_feasible;
      }
    } catch (const DivergenceError&) {
    }
  }
  out.solution = std::move(sol);
  return out;
}

}  // namespace stmpc
