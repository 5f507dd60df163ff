#ifndef STMPC_ANALYSIS_HPP
#define STMPC_ANALYSIS_HPP

#include "stmpc/closedloop.hpp"

namespace stmpc {

/// Average-usage verification rows. For every sampling index k >= 1 the
/// cumulative row compares the realized average spend sum(mu_i, i<k)/t_k with
/// the bound r0/t_k + p; windowed rows do the same over (t_j, t_k] windows
/// using the logged resource level r_j as the budget. margin = bound - average
/// (nonnegative when the bound holds).
struct AverageUsageRow {
  int k = 0;
  double t = 0.0;
  double average = 0.0;
  double bound = 0.0;
  double margin = 0.0;
};

struct AverageUsageWindowRow {
  int j = 0, k = 0;
  double average = 0.0;
  double bound = 0.0;
  double margin = 0.0;
};

struct AverageUsageReport {
  std::vector<AverageUsageRow> rows;
  std::vector<AverageUsageWindowRow> windows;
  double final_average = 0.0;   // cumulative average at the last instant
  double asymptotic_gap = 0.0;  // refill_rate - final_average (finite-horizon proxy)
  int violations = 0;           // rows or windows with margin < -1e-9, plus
                                // records with resource level < -1e-9
  std::vector<std::string> notes;
};

/// Evaluates the transient average-usage bound on a log. Windows are taken for
/// every start index j on the given stride (stride 1 checks every pair).
/// Rows with a zero-length denominator are skipped with a note. The asymptotic
/// bound cannot be verified in finite time; the report substitutes the
/// finite-horizon cumulative average and its distance to the refill rate.
AverageUsageReport transient_bound(const ClosedLoopLog& log, double r0, double p,
                                   int window_stride = 1);

/// Per-step optimal-value decrease slacks: for consecutive solves,
/// slack = V*_{next} - V*_prev + (stage cost integrated over the applied
/// prefix). Steps straddling a reference change are excluded and listed
/// separately. telescoped_sum accumulates the slacks; it equals
/// V*_final - V*_first + sum(applied stage costs) over the included range.
struct ValueDecreaseReport {
  struct Slack {
    int k = 0;  // first record index of the earlier solve
    double slack = 0.0;
  };
  std::vector<Slack> slacks;
  std::vector<int> excluded;  // record indices straddling a reference change
  double telescoped_sum = 0.0;
  double max_slack = 0.0;
};

ValueDecreaseReport value_decrease(const ClosedLoopLog& log);

/// First time after which the state stays inside the max-norm ball of each
/// radius around x_ref, evaluated per segment of constant reference (a segment
/// ends at the next reference change or the end of the log).
struct ConvergenceEntry {
  int segment = 0;
  double radius = 0.0;
  std::optional<double> entered_at;  // absent when never reached
};

struct ConvergenceReport {
  std::vector<ConvergenceEntry> entries;
  double terminal_error = 0.0;  // max-norm error of the final state
};

ConvergenceReport convergence_metrics(const ClosedLoopLog& log, const Vec& x_ref,
                                      const std::vector<double>& radii = {0.1, 0.05,
                                                                          0.01});

}  // namespace stmpc

#endif
