#include "stmpc/analysis.hpp"

#include <cmath>

namespace stmpc {

AverageUsageReport transient_bound(const ClosedLoopLog& log, double r0, double p,
                                   int window_stride) {
  if (window_stride < 1) throw ConfigError("transient_bound: stride must be >= 1");
  AverageUsageReport rep;
  const int K = static_cast<int>(log.steps.size());
  if (K == 0) {
    rep.notes.push_back("empty log");
    return rep;
  }

  // Sampling instants t_0..t_K and resource levels at them; t_k is the
  // left-to-right running sum of the applied intervals.
  std::vector<double> t(K + 1), rlev(K + 1), mu(K);
  for (int i = 0; i < K; ++i) {
    t[i] = log.steps[i].t;
    rlev[i] = log.steps[i].r;
    mu[i] = log.steps[i].mu;
    if (log.steps[i].r < -1e-9) ++rep.violations;
  }
  t[K] = log.t_final;
  rlev[K] = log.r_final;
  if (log.r_final < -1e-9) ++rep.violations;

  double cum = 0.0;
  for (int k = 1; k <= K; ++k) {
    cum += mu[k - 1];
    if (t[k] <= 0.0) {
      rep.notes.push_back("row k=" + std::to_string(k) + " skipped: t_k = 0");
      continue;
    }
    AverageUsageRow row;
    row.k = k;
    row.t = t[k];
    row.average = cum / t[k];
    row.bound = r0 / t[k] + p;
    row.margin = row.bound - row.average;
    if (row.margin < -1e-9) ++rep.violations;
    rep.rows.push_back(row);
    if (k == K) rep.final_average = row.average;
  }
  rep.asymptotic_gap = p - rep.final_average;

  for (int j = 0; j < K; j += window_stride) {
    double wsum = 0.0;
    for (int k = j + 1; k <= K; ++k) {
      wsum += mu[k - 1];
      const double span = t[k] - t[j];
      if (span <= 0.0) continue;
      AverageUsageWindowRow row;
      row.j = j;
      row.k = k;
      row.average = wsum / span;
      row.bound = rlev[j] / span + p;
      row.margin = row.bound - row.average;
      if (row.margin < -1e-9) ++rep.violations;
      rep.windows.push_back(row);
    }
  }
  return rep;
}

ValueDecreaseReport value_decrease(const ClosedLoopLog& log) {
  ValueDecreaseReport rep;
  const int K = static_cast<int>(log.steps.size());
  // Group records by the solve that produced them; the decrease inequality
  // relates consecutive solves through the stage cost of the applied prefix.
  std::vector<int> group_start;
  for (int i = 0; i < K; ++i)
    if (i == 0 || log.steps[i].solve_index != log.steps[i - 1].solve_index)
      group_start.push_back(i);

  for (size_t g = 0; g + 1 < group_start.size(); ++g) {
    const int a = group_start[g];
    const int b = group_start[g + 1];
    if (log.steps[a].ref_epoch != log.steps[b].ref_epoch) {
      rep.excluded.push_back(a);
      continue;
    }
    double applied_cost = 0.0;
    for (int i = a; i < b; ++i) applied_cost += log.steps[i].stage_cost;
    const double slack = log.steps[b].vstar - log.steps[a].vstar + applied_cost;
    rep.slacks.push_back({a, slack});
    rep.telescoped_sum += slack;
    rep.max_slack = std::max(rep.max_slack, slack);
  }
  return rep;
}

ConvergenceReport convergence_metrics(const ClosedLoopLog& log, const Vec& x_ref,
                                      const std::vector<double>& radii) {
  ConvergenceReport rep;
  const int K = static_cast<int>(log.steps.size());

  // Samples including the final one, tagged with their reference epoch.
  struct Sample {
    double t;
    double err;
    int epoch;
  };
  std::vector<Sample> samples;
  samples.reserve(K + 1);
  for (const StepRecord& s : log.steps)
    samples.push_back({s.t, (s.x - x_ref).lpNorm<Eigen::Infinity>(), s.ref_epoch});
  const int final_epoch = K ? log.steps.back().ref_epoch : 0;
  if (log.x_final.size() == x_ref.size())
    samples.push_back(
        {log.t_final, (log.x_final - x_ref).lpNorm<Eigen::Infinity>(), final_epoch});
  if (samples.empty()) return rep;
  rep.terminal_error = samples.back().err;

  int seg = 0;
  size_t seg_begin = 0;
  for (size_t i = 1; i <= samples.size(); ++i) {
    if (i == samples.size() || samples[i].epoch != samples[seg_begin].epoch) {
      for (double radius : radii) {
        ConvergenceEntry entry;
        entry.segment = seg;
        entry.radius = radius;
        // Last index in the segment from which every later sample stays inside.
        std::optional<double> entered;
        for (size_t a = i; a-- > seg_begin;) {
          if (samples[a].err <= radius)
            entered = samples[a].t;
          else
            break;
        }
        entry.entered_at = entered;
        rep.entries.push_back(entry);
      }
      seg_begin = i;
      ++seg;
    }
  }
  return rep;
}

}  // namespace stmpc
