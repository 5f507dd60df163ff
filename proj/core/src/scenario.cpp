#include "stmpc/scenario.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "stmpc/csvio.hpp"

namespace stmpc {
namespace {

struct Line {
  int number = 0;
  std::string section, key, value;
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& origin, int line, const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || tok.empty())
    fail(origin, line, "not a number: '" + tok + "'");
  return v;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

Vec parse_vec(const std::string& origin, int line, const std::string& value) {
  const auto toks = split_ws(value);
  if (toks.empty()) fail(origin, line, "empty vector value");
  Vec v(static_cast<int>(toks.size()));
  for (size_t i = 0; i < toks.size(); ++i)
    v[static_cast<int>(i)] = parse_double(origin, line, toks[i]);
  return v;
}

const std::set<std::string> kPlantKeys = {
    "name", "x0", "x_ref", "u_ref", "input_lower", "input_upper",
    "state_weights", "input_weights", "state_lower", "state_upper"};
const std::set<std::string> kResourceKeys = {
    "variant", "a", "b", "d", "offset", "c", "kappa",
    "p", "r_cap", "r0", "delta_min", "delta_max"};
const std::set<std::string> kControllerKeys = {
    "horizon", "multi_step", "terminal", "h_max", "enforce_state_box",
    "constraint_tol", "stationarity_tol", "penalty_init", "penalty_growth",
    "fd_step_rel", "exact_resource_tol", "multiplier_cap",
    "outer_iters_max", "inner_iters_max"};
const std::set<std::string> kRunKeys = {"t_end", "event", "out_dir", "seed"};

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  std::vector<Line> lines;
  {
    std::istringstream is(text);
    std::string raw;
    int number = 0;
    std::string section;
    while (std::getline(is, raw)) {
      ++number;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      const std::string s = trim(raw);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') fail(origin, number, "malformed section header");
        section = s.substr(1, s.size() - 2);
        if (section != "plant" && section != "resource" && section != "controller" &&
            section != "run")
          fail(origin, number, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) fail(origin, number, "expected 'key = value'");
      if (section.empty()) fail(origin, number, "key outside any section");
      Line l;
      l.number = number;
      l.section = section;
      l.key = trim(s.substr(0, eq));
      l.value = trim(s.substr(eq + 1));
      if (l.key.empty()) fail(origin, number, "empty key");
      lines.push_back(std::move(l));
    }
  }

  Scenario sc;
  std::set<std::string> seen;
  std::set<std::string> sections_present;
  for (const Line& l : lines) {
    sections_present.insert(l.section);
    const std::set<std::string>* known = nullptr;
    if (l.section == "plant") known = &kPlantKeys;
    if (l.section == "resource") known = &kResourceKeys;
    if (l.section == "controller") known = &kControllerKeys;
    if (l.section == "run") known = &kRunKeys;
    if (!known->count(l.key))
      fail(origin, l.number, "unknown key '" + l.key + "' in [" + l.section + "]");
    const std::string id = l.section + "." + l.key;
    if (l.key != "event" && !seen.insert(id).second)
      fail(origin, l.number, "duplicate key '" + id + "'");

    auto num = [&] { return parse_double(origin, l.number, l.value); };
    auto vec = [&] { return parse_vec(origin, l.number, l.value); };
    auto integer = [&] {
      const double v = num();
      if (v != static_cast<long long>(v))
        fail(origin, l.number, "expected an integer for '" + l.key + "'");
      return static_cast<int>(v);
    };
    auto boolean = [&] {
      if (l.value == "true") return true;
      if (l.value == "false") return false;
      fail(origin, l.number, "expected true/false for '" + l.key + "'");
    };

    if (l.section == "plant") {
      if (l.key == "name") sc.plant_name = l.value;
      else if (l.key == "x0") sc.x0 = vec();
      else if (l.key == "x_ref") sc.x_ref = vec();
      else if (l.key == "u_ref") sc.u_ref = vec();
      else if (l.key == "input_lower") sc.input_lower = vec();
      else if (l.key == "input_upper") sc.input_upper = vec();
      else if (l.key == "state_weights") sc.state_weights = vec();
      else if (l.key == "input_weights") sc.input_weights = vec();
      else if (l.key == "state_lower") sc.state_lower = vec();
      else if (l.key == "state_upper") sc.state_upper = vec();
    } else if (l.section == "resource") {
      if (l.key == "variant") sc.variant = l.value;
      else if (l.key == "a") sc.a = num();
      else if (l.key == "b") sc.b = num();
      else if (l.key == "d") sc.d = num();
      else if (l.key == "offset") { sc.offset = num(); sc.offset_set = true; }
      else if (l.key == "c") sc.c = num();
      else if (l.key == "kappa") sc.kappa = num();
      else if (l.key == "p") sc.p = num();
      else if (l.key == "r_cap") sc.r_cap = num();
      else if (l.key == "r0") sc.r0 = num();
      else if (l.key == "delta_min") sc.delta_min = num();
      else if (l.key == "delta_max") sc.delta_max = num();
    } else if (l.section == "controller") {
      if (l.key == "horizon") sc.horizon = integer();
      else if (l.key == "multi_step") sc.multi_step = integer();
      else if (l.key == "terminal") sc.terminal = l.value;
      else if (l.key == "h_max") sc.h_max = num();
      else if (l.key == "enforce_state_box") sc.enforce_state_box = boolean();
      else if (l.key == "constraint_tol") sc.solver.constraint_tol = num();
      else if (l.key == "stationarity_tol") sc.solver.stationarity_tol = num();
      else if (l.key == "penalty_init") sc.solver.penalty_init = num();
      else if (l.key == "penalty_growth") sc.solver.penalty_growth = num();
      else if (l.key == "fd_step_rel") sc.solver.fd_step_rel = num();
      else if (l.key == "exact_resource_tol") sc.solver.exact_resource_tol = num();
      else if (l.key == "multiplier_cap") sc.solver.multiplier_cap = num();
      else if (l.key == "outer_iters_max") sc.solver.outer_iters_max = integer();
      else if (l.key == "inner_iters_max") sc.solver.inner_iters_max = integer();
    } else {  // run
      if (l.key == "t_end") sc.t_end = num();
      else if (l.key == "out_dir") sc.out_dir = l.value;
      else if (l.key == "seed") sc.seed = static_cast<unsigned long long>(num());
      else if (l.key == "event") {
        const auto toks = split_ws(l.value);
        const int n = static_cast<int>(sc.x0.size());
        const int m = static_cast<int>(sc.u_ref.size());
        if (n == 0 || m == 0)
          fail(origin, l.number, "event must come after the plant vectors");
        if (static_cast<int>(toks.size()) != 2 + n + m)
          fail(origin, l.number,
               "event needs: <time> set_point_change <new x_ref> <new u_ref>");
        if (toks[1] != "set_point_change")
          fail(origin, l.number, "unknown event kind '" + toks[1] + "'");
        Scenario::EventSpec ev;
        ev.at_time = parse_double(origin, l.number, toks[0]);
        ev.x_ref = Vec(n);
        ev.u_ref = Vec(m);
        for (int i = 0; i < n; ++i)
          ev.x_ref[i] = parse_double(origin, l.number, toks[2 + i]);
        for (int i = 0; i < m; ++i)
          ev.u_ref[i] = parse_double(origin, l.number, toks[2 + n + i]);
        sc.events.push_back(std::move(ev));
      }
    }
  }

  for (const char* required : {"plant", "resource", "run"})
    if (!sections_present.count(required))
      throw ConfigError(origin + ": missing section [" + std::string(required) + "]");

  auto require = [&](bool present, const std::string& what) {
    if (!present) throw ConfigError(origin + ": missing " + what);
  };
  require(!sc.plant_name.empty(), "plant.name");
  require(sc.x0.size() > 0, "plant.x0");
  require(sc.x_ref.size() > 0, "plant.x_ref");
  require(sc.u_ref.size() > 0, "plant.u_ref");
  require(sc.input_lower.size() > 0, "plant.input_lower");
  require(sc.input_upper.size() > 0, "plant.input_upper");
  require(sc.state_weights.size() > 0, "plant.state_weights");
  require(sc.input_weights.size() > 0, "plant.input_weights");
  require(!sc.variant.empty(), "resource.variant");
  require(seen.count("resource.p") > 0, "resource.p");
  require(seen.count("resource.r_cap") > 0, "resource.r_cap");
  require(seen.count("resource.r0") > 0, "resource.r0");
  require(seen.count("resource.delta_min") > 0, "resource.delta_min");
  require(seen.count("resource.delta_max") > 0, "resource.delta_max");
  require(seen.count("run.t_end") > 0, "run.t_end");
  if (sc.state_lower.has_value() != sc.state_upper.has_value())
    throw ConfigError(origin + ": state_lower/state_upper must come together");

  // Variant-specific keys must match the chosen variant.
  auto forbid = [&](const char* key) {
    if (seen.count(std::string("resource.") + key))
      throw ConfigError(origin + ": key '" + key + "' is not valid for variant '" +
                        sc.variant + "'");
  };
  if (sc.variant == "constant") {
    require(seen.count("resource.c") > 0, "resource.c");
    forbid("a"); forbid("b"); forbid("d"); forbid("offset"); forbid("kappa");
  } else if (sc.variant == "quadratic_energy") {
    require(seen.count("resource.a") > 0, "resource.a");
    require(seen.count("resource.b") > 0, "resource.b");
    require(seen.count("resource.d") > 0, "resource.d");
    forbid("c"); forbid("kappa");
    if (!sc.offset_set) { sc.offset = sc.delta_min; sc.offset_set = true; }
  } else if (sc.variant == "inverse_compute") {
    require(seen.count("resource.kappa") > 0, "resource.kappa");
    forbid("a"); forbid("b"); forbid("d"); forbid("offset"); forbid("c");
  } else {
    throw ConfigError(origin + ": unknown resource variant '" + sc.variant + "'");
  }
  if (sc.terminal != "equality_to_reference" && sc.terminal != "none")
    throw ConfigError(origin + ": controller.terminal must be 'equality_to_reference' or 'none'");
  if (sc.r0 < 0.0 || sc.r0 > sc.r_cap)
    throw ConfigError(origin + ": resource.r0 outside [0, r_cap]");
  if (sc.horizon < 1 || sc.multi_step < 1 || sc.multi_step > sc.horizon)
    throw ConfigError(origin + ": controller horizon/multi_step out of range");
  if (sc.h_max <= 0.0) throw ConfigError(origin + ": controller.h_max must be > 0");
  if (sc.t_end < 0.0) throw ConfigError(origin + ": run.t_end must be >= 0");
  if (sc.enforce_state_box && !sc.state_lower)
    throw ConfigError(origin + ": enforce_state_box needs plant.state_lower/upper");

  // Build and validate the referenced models; all type invariants are
  // enforced here so a parsed scenario is usable as-is.
  const PlantModel plant = scenario_plant(sc);
  scenario_resource(sc);
  for (const auto& ev : sc.events) {
    Vec dx(plant.state_dim);
    plant.vector_field(ev.x_ref, ev.u_ref, dx);
    if (dx.lpNorm<Eigen::Infinity>() > 1e-10)
      throw ConfigError(origin + ": event reference pair is not an equilibrium");
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

namespace {
std::string vec_to_string(const Vec& v) {
  std::string s;
  for (int i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_double(v[i]);
  }
  return s;
}
}  // namespace

std::string dump_normalized(const Scenario& s) {
  std::ostringstream o;
  o << "[plant]\n";
  o << "name = " << s.plant_name << '\n';
  o << "x0 = " << vec_to_string(s.x0) << '\n';
  o << "x_ref = " << vec_to_string(s.x_ref) << '\n';
  o << "u_ref = " << vec_to_string(s.u_ref) << '\n';
  o << "input_lower = " << vec_to_string(s.input_lower) << '\n';
  o << "input_upper = " << vec_to_string(s.input_upper) << '\n';
  o << "state_weights = " << vec_to_string(s.state_weights) << '\n';
  o << "input_weights = " << vec_to_string(s.input_weights) << '\n';
  if (s.state_lower) {
    o << "state_lower = " << vec_to_string(*s.state_lower) << '\n';
    o << "state_upper = " << vec_to_string(*s.state_upper) << '\n';
  }
  o << "\n[resource]\n";
  o << "variant = " << s.variant << '\n';
  if (s.variant == "constant") o << "c = " << format_double(s.c) << '\n';
  if (s.variant == "quadratic_energy") {
    o << "a = " << format_double(s.a) << '\n';
    o << "b = " << format_double(s.b) << '\n';
    o << "d = " << format_double(s.d) << '\n';
    o << "offset = " << format_double(s.offset) << '\n';
  }
  if (s.variant == "inverse_compute")
    o << "kappa = " << format_double(s.kappa) << '\n';
  o << "p = " << format_double(s.p) << '\n';
  o << "r_cap = " << format_double(s.r_cap) << '\n';
  o << "r0 = " << format_double(s.r0) << '\n';
  o << "delta_min = " << format_double(s.delta_min) << '\n';
  o << "delta_max = " << format_double(s.delta_max) << '\n';
  o << "\n[controller]\n";
  o << "horizon = " << s.horizon << '\n';
  o << "multi_step = " << s.multi_step << '\n';
  o << "terminal = " << s.terminal << '\n';
  o << "h_max = " << format_double(s.h_max) << '\n';
  o << "enforce_state_box = " << (s.enforce_state_box ? "true" : "false") << '\n';
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) o << key << " = " << format_double(*v) << '\n';
  };
  opt("constraint_tol", s.solver.constraint_tol);
  opt("stationarity_tol", s.solver.stationarity_tol);
  opt("penalty_init", s.solver.penalty_init);
  opt("penalty_growth", s.solver.penalty_growth);
  opt("fd_step_rel", s.solver.fd_step_rel);
  opt("exact_resource_tol", s.solver.exact_resource_tol);
  opt("multiplier_cap", s.solver.multiplier_cap);
  if (s.solver.outer_iters_max) o << "outer_iters_max = " << *s.solver.outer_iters_max << '\n';
  if (s.solver.inner_iters_max) o << "inner_iters_max = " << *s.solver.inner_iters_max << '\n';
  o << "\n[run]\n";
  o << "t_end = " << format_double(s.t_end) << '\n';
  auto events = s.events;
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return a.at_time < b.at_time; });
  for (const auto& ev : events)
    o << "event = " << format_double(ev.at_time) << " set_point_change "
      << vec_to_string(ev.x_ref) << ' ' << vec_to_string(ev.u_ref) << '\n';
  if (!s.out_dir.empty()) o << "out_dir = " << s.out_dir << '\n';
  o << "seed = " << s.seed << '\n';
  return o.str();
}

bool scenario_equal(const Scenario& a, const Scenario& b) {
  return dump_normalized(a) == dump_normalized(b);
}

PlantModel scenario_plant(const Scenario& s) {
  PlantConfig pc;
  pc.x_ref = s.x_ref;
  pc.u_ref = s.u_ref;
  pc.input_lower = s.input_lower;
  pc.input_upper = s.input_upper;
  pc.state_weights = s.state_weights;
  pc.input_weights = s.input_weights;
  pc.sample_state_lower = s.state_lower;
  pc.sample_state_upper = s.state_upper;
  PlantModel plant = make_plant(s.plant_name, pc);
  if (s.x0.size() != plant.state_dim)
    throw ConfigError("scenario: x0 has the wrong dimension for plant '" +
                      s.plant_name + "'");
  return plant;
}

ResourceModel scenario_resource(const Scenario& s) {
  ResourceCost cost = ResourceCost::constant(0.0);
  if (s.variant == "constant") cost = ResourceCost::constant(s.c);
  else if (s.variant == "quadratic_energy")
    cost = ResourceCost::quadratic_energy(s.a, s.b, s.d, s.offset);
  else if (s.variant == "inverse_compute") cost = ResourceCost::inverse_compute(s.kappa);
  else throw ConfigError("scenario: unknown resource variant '" + s.variant + "'");
  return make_resource_model(s.p, s.r_cap, std::move(cost), s.delta_min, s.delta_max);
}

RunConfig scenario_run_config(const Scenario& s) {
  RunConfig rc;
  rc.horizon = s.horizon;
  rc.multi_step = s.multi_step;
  rc.terminal_mode = s.terminal == "none" ? TerminalMode::none
                                          : TerminalMode::equality_to_reference;
  rc.integrator.h_max = s.h_max;
  rc.enforce_sample_state_box = s.enforce_state_box;
  rc.t_end = s.t_end;
  SolverConfig& sol = rc.solver;
  if (s.solver.constraint_tol) sol.constraint_tol = *s.solver.constraint_tol;
  if (s.solver.stationarity_tol) sol.stationarity_tol = *s.solver.stationarity_tol;
  if (s.solver.penalty_init) sol.penalty_init = *s.solver.penalty_init;
  if (s.solver.penalty_growth) sol.penalty_growth = *s.solver.penalty_growth;
  if (s.solver.fd_step_rel) sol.fd_step_rel = *s.solver.fd_step_rel;
  if (s.solver.exact_resource_tol) sol.exact_resource_tol = *s.solver.exact_resource_tol;
  if (s.solver.multiplier_cap) sol.multiplier_cap = *s.solver.multiplier_cap;
  if (s.solver.outer_iters_max) sol.outer_iters_max = *s.solver.outer_iters_max;
  if (s.solver.inner_iters_max) sol.inner_iters_max = *s.solver.inner_iters_max;
  validate_config(sol);
  return rc;
}

std::vector<ScenarioEvent> scenario_events(const Scenario& s) {
  std::vector<ScenarioEvent> events;
  for (const auto& ev : s.events) events.push_back({ev.at_time, ev.x_ref, ev.u_ref});
  return events;
}

}  // namespace stmpc
