#include "stmpc/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace stmpc {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void header_vec(std::ostream& os, const char* stem, int count) {
  for (int i = 1; i <= count; ++i) os << ',' << stem << '_' << i;
}

void cells_vec(std::ostream& os, const Vec& v) {
  for (int i = 0; i < v.size(); ++i) os << ',' << format_double(v[i]);
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const ClosedLoopLog& log) {
  os << "k,t,dt";
  header_vec(os, "x", log.state_dim);
  header_vec(os, "u", log.input_dim);
  os << ",r,mu,vstar,status,fallback\n";
  for (const StepRecord& s : log.steps) {
    os << s.k << ',' << format_double(s.t) << ',' << format_double(s.dt);
    cells_vec(os, s.x);
    cells_vec(os, s.u);
    os << ',' << format_double(s.r) << ',' << format_double(s.mu) << ','
       << format_double(s.vstar) << ',' << to_string(s.status) << ','
       << (s.fallback ? 1 : 0) << '\n';
  }
  const Vec last_u = log.steps.empty() ? Vec::Zero(log.input_dim) : log.steps.back().u;
  const double last_v = log.steps.empty() ? 0.0 : log.steps.back().vstar;
  os << log.steps.size() << ',' << format_double(log.t_final) << ',' << format_double(0.0);
  cells_vec(os, log.x_final);
  cells_vec(os, last_u);
  os << ',' << format_double(log.r_final) << ',' << format_double(0.0) << ','
     << format_double(last_v) << ",end,0\n";
}

void write_dense_csv(std::ostream& os, const ClosedLoopLog& log) {
  os << 't';
  header_vec(os, "x", log.state_dim);
  header_vec(os, "u", log.input_dim);
  os << '\n';
  for (const DensePoint& p : log.dense) {
    os << format_double(p.t);
    cells_vec(os, p.x);
    cells_vec(os, p.u);
    os << '\n';
  }
}

void write_analysis_csv(std::ostream& os, const AverageUsageReport& report) {
  os << "k,t,avg_mu_rate,bound,margin\n";
  for (const AverageUsageRow& r : report.rows)
    os << r.k << ',' << format_double(r.t) << ',' << format_double(r.average) << ','
       << format_double(r.bound) << ',' << format_double(r.margin) << '\n';
}

void write_analysis_windows_csv(std::ostream& os, const AverageUsageReport& report) {
  os << "j,k,avg_mu_rate,bound,margin\n";
  for (const AverageUsageWindowRow& r : report.windows)
    os << r.j << ',' << r.k << ',' << format_double(r.average) << ','
       << format_double(r.bound) << ',' << format_double(r.margin) << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "value,total_cost,final_avg_mu_rate,samples,status\n";
  for (const SweepRow& r : rows)
    os << format_double(r.value) << ',' << format_double(r.total_cost) << ','
       << format_double(r.final_avg_mu_rate) << ',' << r.samples << ',' << r.status
       << '\n';
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file '" + path + "'");
  return read_csv(in);
}

}  // namespace stmpc
