#ifndef STMPC_SOLVER_HPP
#define STMPC_SOLVER_HPP

#include <iosfwd>

#include "stmpc/transcription.hpp"

namespace stmpc {

struct SolverConfig {
  int outer_iters_max = 40;
  int inner_iters_max = 200;        // per outer iteration
  double penalty_init = 10.0;       // rho_0
  double penalty_growth = 10.0;     // gamma > 1
  double constraint_tol = 1e-6;     // equalities and general inequalities
  double stationarity_tol = 1e-5;   // projected-gradient max norm
  double exact_resource_tol = 1e-8;  // exact min-dynamics resource levels
  double fd_step_rel = 1e-6;
  double multiplier_cap = 1e8;
  std::ostream* trace = nullptr;  // optional per-outer CSV trace
};

void validate_config(const SolverConfig& cfg);

enum class SolveStatus { converged, max_iters_feasible, infeasible, diverged };
const char* to_string(SolveStatus s);

/// Bound-constrained nonlinear program with general equality/inequality
/// constraints. eval fills the objective and both constraint blocks at once;
/// inequality entries are feasible when <= 0. accept_feasible decides whether
/// a point meets the exit feasibility tolerances (default: every violation
/// <= constraint_tol); feasibility_violation reports the scalar used in
/// status lines. derivatives may supply structured finite differences; when
/// empty a generic central difference of eval is used. An Nlp instance is not
/// safe for concurrent use (adapters may cache evaluations); build one per
/// solve.
struct Nlp {
  int dim = 0;
  int num_eq = 0;
  int num_ineq = 0;
  Vec lower, upper;
  std::function<void(const Vec& z, double& f, Vec& eq, Vec& ineq)> eval;
  std::function<bool(const Vec& z, const Vec& eq, const Vec& ineq,
                     const SolverConfig& cfg)>
      accept_feasible;
  std::function<double(const Vec& z, const Vec& eq, const Vec& ineq,
                       const SolverConfig& cfg)>
      feasibility_violation;
  std::function<void(const Vec& z, const SolverConfig& cfg, Vec& grad_f,
                     Mat& jac_eq, Mat& jac_ineq)>
      derivatives;
};

/// Optional warm multipliers carried between consecutive solves.
struct AlmWarm {
  Vec eq_multipliers, ineq_multipliers;
  double penalty = 0.0;  // <= 0 keeps the configured penalty_init
};

struct AlmResult {
  Vec z;
  double objective = 0.0;
  Vec eq, ineq;
  Vec eq_multipliers, ineq_multipliers;
  double penalty = 0.0;
  SolveStatus status = SolveStatus::infeasible;
  int outer_iterations = 0;
  long inner_iterations = 0;
  double feasibility = 0.0;  // violation scalar at the final point
  double stationarity = 0.0;
  std::vector<double> objective_history;  // objective at the end of each outer
  std::vector<double> merit_start, merit_end;  // per outer, fixed multipliers
};

/// Augmented-Lagrangian loop: equalities and general inequalities by
/// multiplier/penalty terms, bounds enforced exactly at every inner iterate by
/// projection. The inner solver takes projected quasi-Newton steps built from
/// a damped BFGS model of the objective plus the Gauss-Newton term of the
/// penalty. Deterministic given identical inputs.
AlmResult alm_minimize(const Nlp& nlp, const Vec& z0, const SolverConfig& cfg,
                       const AlmWarm* warm = nullptr);

struct FdDerivatives {
  Vec objective_gradient;
  Mat eq_jacobian;
  Mat ineq_jacobian;
};

/// Central finite differences of an Nlp at z with per-coordinate step
/// fd_step_rel * max(1, |z_c|).
FdDerivatives fd_derivatives(const Nlp& nlp, const Vec& z, double fd_step_rel);

/// Transcribes an instance into an Nlp over (inputs, intervals, predicted
/// resource levels r_1..r_N): objective and terminal equality from the state
/// rollout, the resource recursion relaxed into r_{i+1} - r_i - gain(dt_i) <= 0
/// with the cap and r >= 0 as variable bounds. Exit feasibility additionally
/// requires the exact min-dynamics rollout to keep resource levels above
/// -exact_resource_tol; the relaxed rows are implied once that holds.
Nlp make_ocp_nlp(const OcpInstance& inst);

/// z-vector layout helpers for make_ocp_nlp.
int ocp_nlp_dim(const OcpInstance& inst);
Vec pack_decision(const OcpInstance& inst, const DecisionVector& d);
DecisionVector unpack_decision(const OcpInstance& inst, const Vec& z);

/// Objective gradient and residual Jacobians of the transcribed program at
/// (d, exact min-dynamics resource levels), by central finite differences.
FdDerivatives gradient(const OcpInstance& inst, const DecisionVector& d,
                       double fd_step_rel = 1e-6);

struct SolveOutcome {
  OcpSolution solution;
  SolveStatus status = SolveStatus::infeasible;
  int outer_iterations = 0;
  long inner_iterations = 0;
  std::vector<double> objective_history;
  std::vector<double> merit_start, merit_end;
  Vec eq_multipliers, ineq_multipliers;
  double penalty = 0.0;
};

/// Solves the instance, optionally warm-started (shape must match, feasibility
/// not required); warm_multipliers may carry duals from a previous related
/// solve. The returned solution's states/resources are the exact rollout of
/// the returned decision and value is its rollout objective.
///
/// dt_min is treated as a hard bound. Configurations with dt_min = 0 and a
/// resource cost discontinuous at 0 may have no attained minimum; such solves
/// can end at max_iters_feasible.
SolveOutcome solve(const OcpInstance& inst,
                   const std::optional<DecisionVector>& warm,
                   const SolverConfig& cfg,
                   const AlmWarm* warm_multipliers = nullptr);

}  // namespace stmpc

#endif
