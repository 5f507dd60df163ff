// stmpc command-line front end: scenario-driven check / run / sweep.
//
// Exit codes: 0 success, 1 configuration or assumption failure, 2 runtime
// failure (I/O, divergence, infeasibility mid-run).

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "stmpc/analysis.hpp"
#include "stmpc/csvio.hpp"
#include "stmpc/scenario.hpp"

namespace fs = std::filesystem;
using namespace stmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string interval_list(const std::vector<Interval>& set) {
  if (set.empty()) return "(empty)";
  std::string s;
  for (const Interval& iv : set) {
    if (!s.empty()) s += " ";
    s += "[" + format_double(iv.lo) + ", " + format_double(iv.hi) + "]";
  }
  return s;
}

void dump_normalized_to(const Scenario& sc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write normalized scenario to '" + path + "'");
  out << dump_normalized(sc);
}

// Precedence: --out flag, scenario out_dir, $STMPC_OUT_DIR, then "out".
fs::path resolve_out_dir(const std::string& flag_value, const Scenario& sc) {
  if (!flag_value.empty()) return flag_value;
  if (!sc.out_dir.empty()) return sc.out_dir;
  if (const char* env = std::getenv("STMPC_OUT_DIR"); env && *env) return env;
  return "out";
}

int cmd_check(const std::string& scenario_path, const std::string& dump_path) {
  const Scenario sc = load_scenario(scenario_path);
  if (!dump_path.empty()) dump_normalized_to(sc, dump_path);
  const ResourceModel resource = scenario_resource(sc);
  const AssumptionReport rep = check_assumptions(resource);

  std::cout << "scenario: " << scenario_path << "\n";
  std::cout << "a2 (zero-interval spend or positive minimum interval): "
            << (rep.a2_holds ? "PASS" : "FAIL") << "\n";
  std::cout << "a3 (recovery set nonempty on [0, delta_max]):          "
            << (rep.a3_holds ? "PASS" : "FAIL") << "\n";
  std::cout << "a4 (admissible recovery interval):                     "
            << (rep.a4_holds ? "PASS" : "FAIL") << "\n";
  if (rep.recovery_interval)
    std::cout << "recovery_interval = " << format_double(*rep.recovery_interval) << "\n";
  std::cout << "recovery set in [delta_min, delta_max]: " << interval_list(rep.d_set)
            << "\n";
  if (!rep.notes.empty()) std::cout << "notes: " << rep.notes << "\n";
  return rep.all() ? kExitOk : kExitConfig;
}

struct RunArtifacts {
  ClosedLoopLog log;
  AverageUsageReport usage;
};

RunArtifacts execute(const Scenario& sc) {
  RunArtifacts art;
  art.log = run(scenario_plant(sc), scenario_resource(sc), sc.x0, sc.r0,
                scenario_run_config(sc), scenario_events(sc));
  art.usage = transient_bound(art.log, sc.r0, sc.p);
  return art;
}

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& fn) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  fn(out);
  if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

void write_plot_series(const fs::path& dir, const Scenario& sc,
                       const ClosedLoopLog& log, const AverageUsageReport& usage) {
  fs::create_directories(dir);
  const ResourceModel resource = scenario_resource(sc);
  write_file(dir / "mu.csv", [&](std::ostream& os) {
    os << "delta,mu\n";
    const int kPoints = 256;
    for (int i = 0; i <= kPoints; ++i) {
      const double dt =
          sc.delta_min + (sc.delta_max - sc.delta_min) * i / double(kPoints);
      os << format_double(dt) << ',' << format_double(resource.cost(dt)) << '\n';
    }
  });
  for (int j = 0; j < log.state_dim; ++j) {
    write_file(dir / ("x" + std::to_string(j + 1) + ".csv"), [&](std::ostream& os) {
      os << "t,x" << j + 1 << '\n';
      for (const DensePoint& p : log.dense)
        os << format_double(p.t) << ',' << format_double(p.x[j]) << '\n';
    });
  }
  for (int j = 0; j < log.input_dim; ++j) {
    write_file(dir / ("u" + std::to_string(j + 1) + ".csv"), [&](std::ostream& os) {
      os << "t,u" << j + 1 << '\n';
      for (const DensePoint& p : log.dense)
        os << format_double(p.t) << ',' << format_double(p.u[j]) << '\n';
    });
  }
  auto per_sample = [&](const char* name, auto pick) {
    write_file(dir / name, [&](std::ostream& os) {
      os << "t,value\n";
      for (const StepRecord& s : log.steps)
        os << format_double(s.t) << ',' << format_double(pick(s)) << '\n';
    });
  };
  per_sample("delta_k.csv", [](const StepRecord& s) { return s.dt; });
  per_sample("mu_k.csv", [](const StepRecord& s) { return s.mu; });
  per_sample("r_k.csv", [](const StepRecord& s) { return s.r; });
  write_file(dir / "avg_usage.csv", [&](std::ostream& os) {
    os << "t,avg_mu_rate\n";
    for (const auto& r : usage.rows)
      os << format_double(r.t) << ',' << format_double(r.average) << '\n';
  });
  write_file(dir / "avg_bound.csv", [&](std::ostream& os) {
    os << "t,bound\n";
    for (const auto& r : usage.rows)
      os << format_double(r.t) << ',' << format_double(r.bound) << '\n';
  });
}

void print_summary(const Scenario& sc, const ClosedLoopLog& log,
                   const AverageUsageReport& usage, double seconds) {
  std::cout << "run: " << log.steps.size() << " sampling intervals over "
            << format_double(log.t_final) << " s (wall " << seconds << " s)\n";
  int fallbacks = 0;
  double min_r = log.r_final;
  for (const StepRecord& s : log.steps) {
    fallbacks += s.fallback ? 1 : 0;
    min_r = std::min(min_r, s.r);
  }
  std::cout << "resource: min level " << format_double(min_r) << ", final "
            << format_double(log.r_final) << " of cap " << format_double(sc.r_cap)
            << "\n";
  std::cout << "fallback steps: " << fallbacks << "\n";
  std::cout << "average usage: final " << format_double(usage.final_average)
            << " vs refill rate " << format_double(sc.p) << " (gap "
            << format_double(usage.asymptotic_gap) << "), "
            << usage.violations << " bound violations\n";
  const ValueDecreaseReport vd = value_decrease(log);
  std::cout << "value decrease: max slack " << format_double(vd.max_slack) << " over "
            << vd.slacks.size() << " solve pairs (" << vd.excluded.size()
            << " excluded at reference changes)\n";
  const ConvergenceReport conv = convergence_metrics(log, log.x_ref_final);
  std::cout << "terminal error vs final reference: "
            << format_double(conv.terminal_error) << "\n";
  for (const auto& e : conv.entries)
    if (e.segment == (log.steps.empty() ? 0 : log.steps.back().ref_epoch))
      std::cout << "  ball " << e.radius << ": "
                << (e.entered_at ? "entered at t=" + format_double(*e.entered_at)
                                 : std::string("not reached"))
                << "\n";
  if (!log.completed())
    std::cout << "terminated early: " << log.termination_reason << "\n";
}

int cmd_run(const std::string& scenario_path, const std::string& out_flag,
            bool with_csv, bool with_plots, const std::string& dump_path,
            const std::string& trace_path) {
  const Scenario sc = load_scenario(scenario_path);
  if (!dump_path.empty()) dump_normalized_to(sc, dump_path);

  const auto t0 = std::chrono::steady_clock::now();
  RunArtifacts art;
  std::ofstream trace;
  if (!trace_path.empty()) {
    trace.open(trace_path, std::ios::binary);
    if (!trace) throw std::runtime_error("cannot open trace file '" + trace_path + "'");
    trace << "outer,inner_total,objective,feasibility_ratio,stationarity,penalty\n";
    Scenario traced = sc;
    RunConfig rc = scenario_run_config(traced);
    rc.solver.trace = &trace;
    art.log = run(scenario_plant(traced), scenario_resource(traced), traced.x0,
                  traced.r0, rc, scenario_events(traced));
    art.usage = transient_bound(art.log, traced.r0, traced.p);
  } else {
    art = execute(sc);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out_dir = resolve_out_dir(out_flag, sc);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec && !fs::is_directory(out_dir))
    throw std::runtime_error("cannot create output directory '" + out_dir.string() +
                             "': " + ec.message());

  if (with_csv) {
    write_file(out_dir / "trajectory.csv",
               [&](std::ostream& os) { write_trajectory_csv(os, art.log); });
    write_file(out_dir / "dense.csv",
               [&](std::ostream& os) { write_dense_csv(os, art.log); });
    write_file(out_dir / "analysis.csv",
               [&](std::ostream& os) { write_analysis_csv(os, art.usage); });
    write_file(out_dir / "analysis_windows.csv",
               [&](std::ostream& os) { write_analysis_windows_csv(os, art.usage); });
  }
  if (with_plots) write_plot_series(out_dir / "plots", sc, art.log, art.usage);

  print_summary(sc, art.log, art.usage, seconds);
  return art.log.completed() ? kExitOk : kExitRuntime;
}

double* scenario_scalar_slot(Scenario& sc, const std::string& key) {
  if (key == "resource.p") return &sc.p;
  if (key == "resource.r_cap") return &sc.r_cap;
  if (key == "resource.r0") return &sc.r0;
  if (key == "resource.delta_min") return &sc.delta_min;
  if (key == "resource.delta_max") return &sc.delta_max;
  if (key == "resource.a") return &sc.a;
  if (key == "resource.b") return &sc.b;
  if (key == "resource.d") return &sc.d;
  if (key == "resource.offset") return &sc.offset;
  if (key == "resource.c") return &sc.c;
  if (key == "resource.kappa") return &sc.kappa;
  if (key == "controller.h_max") return &sc.h_max;
  if (key == "run.t_end") return &sc.t_end;
  return nullptr;
}

int cmd_sweep(const std::string& scenario_path, const std::string& param,
              const std::vector<double>& values, const std::string& out_flag) {
  const Scenario base = load_scenario(scenario_path);
  std::vector<SweepRow> rows;
  bool any_failed = false;

  for (double value : values) {
    Scenario sc = base;
    SweepRow row;
    row.value = value;
    if (param == "controller.horizon") {
      sc.horizon = static_cast<int>(value);
    } else if (param == "controller.multi_step") {
      sc.multi_step = static_cast<int>(value);
    } else if (double* slot = scenario_scalar_slot(sc, param)) {
      *slot = value;
    } else {
      throw ConfigError("sweep: unknown scalar scenario key '" + param + "'");
    }
    try {
      // Re-validate through the normalized round trip so per-value scenarios
      // obey the same invariants as loaded ones.
      sc = parse_scenario(dump_normalized(sc), scenario_path + "#" + param);
      const RunArtifacts art = execute(sc);
      if (!art.log.completed())
        throw std::runtime_error(art.log.termination_reason);
      double total_cost = 0.0;
      for (const StepRecord& s : art.log.steps) total_cost += s.stage_cost;
      row.total_cost = total_cost;
      row.final_avg_mu_rate = art.usage.final_average;
      row.samples = static_cast<int>(art.log.steps.size());
      row.status = "ok";
    } catch (const std::exception& e) {
      row.status = e.what();
      for (char& ch : row.status)
        if (ch == ',' || ch == '\n') ch = ';';
      any_failed = true;
    }
    rows.push_back(std::move(row));
  }

  const fs::path out_dir = resolve_out_dir(out_flag, base);
  fs::create_directories(out_dir);
  write_file(out_dir / "sweep.csv",
             [&](std::ostream& os) { write_sweep_csv(os, rows); });
  for (const SweepRow& r : rows)
    std::cout << param << " = " << format_double(r.value) << ": " << r.status
              << " (cost " << format_double(r.total_cost) << ", samples "
              << r.samples << ")\n";
  return any_failed ? kExitRuntime : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-triggered resource-aware MPC simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_flag, dump_path, trace_path, sweep_param;
  std::vector<double> sweep_values;
  bool with_csv = false, with_plots = false;

  CLI::App* check = app.add_subcommand("check", "evaluate the resource assumptions");
  check->add_option("scenario", scenario_path, "scenario file")->required();
  check->add_option("--dump-normalized", dump_path, "write the canonical scenario text");

  CLI::App* runc = app.add_subcommand("run", "run the closed loop and write logs");
  runc->add_option("scenario", scenario_path, "scenario file")->required();
  runc->add_option("--out", out_flag, "output directory (default: scenario out_dir, then $STMPC_OUT_DIR)");
  runc->add_flag("--csv", with_csv, "write trajectory/dense/analysis CSV files");
  runc->add_flag("--plots", with_plots, "write plot-ready data series");
  runc->add_option("--dump-normalized", dump_path, "write the canonical scenario text");
  runc->add_option("--trace", trace_path, "write per-iteration solver trace CSV");

  CLI::App* sweep = app.add_subcommand("sweep", "run once per parameter value");
  sweep->add_option("scenario", scenario_path, "scenario file")->required();
  sweep->add_option("--param", sweep_param, "scalar scenario key, e.g. resource.p")->required();
  sweep->add_option("--values", sweep_values, "values to sweep")->required()->expected(1, -1);
  sweep->add_option("--out", out_flag, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? kExitConfig : kExitOk;
  }

  try {
    if (check->parsed()) return cmd_check(scenario_path, dump_path);
    if (runc->parsed())
      return cmd_run(scenario_path, out_flag, with_csv, with_plots, dump_path, trace_path);
    return cmd_sweep(scenario_path, sweep_param, sweep_values, out_flag);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleStartError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
