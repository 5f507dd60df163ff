#ifndef STMPC_CSVIO_HPP
#define STMPC_CSVIO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "stmpc/analysis.hpp"
#include "stmpc/closedloop.hpp"

namespace stmpc {

/// Shortest round-trip decimal form (17 significant digits, C locale).
std::string format_double(double v);

/// trajectory.csv: k,t,dt,x_1..x_n,u_1..u_m,r,mu,vstar,status,fallback —
/// one row per applied interval plus a terminal row (dt and mu zero, status
/// "end", u and vstar repeated from the last step).
void write_trajectory_csv(std::ostream& os, const ClosedLoopLog& log);

/// dense.csv: t,x_1..x_n,u_1..u_m at every integrator substep.
void write_dense_csv(std::ostream& os, const ClosedLoopLog& log);

/// analysis.csv: k,t,avg_mu_rate,bound,margin (cumulative rows).
void write_analysis_csv(std::ostream& os, const AverageUsageReport& report);

/// analysis_windows.csv: j,k,avg_mu_rate,bound,margin.
void write_analysis_windows_csv(std::ostream& os, const AverageUsageReport& report);

struct SweepRow {
  double value = 0.0;
  double total_cost = 0.0;       // integral of the stage cost over the run
  double final_avg_mu_rate = 0.0;
  int samples = 0;
  std::string status;  // "ok" or the failure reason
};
/// sweep.csv: value,total_cost,final_avg_mu_rate,samples,status.
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// Minimal CSV reader for the files written above (no quoting/escapes).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 when absent
};
CsvTable read_csv(std::istream& is);
CsvTable read_csv_file(const std::string& path);

}  // namespace stmpc

#endif
