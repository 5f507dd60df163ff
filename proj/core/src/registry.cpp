#include "stmpc/registry.hpp"

#include <cmath>
#include <map>

namespace stmpc {
namespace {

std::map<std::string, PlantDefinition>& table() {
  static std::map<std::string, PlantDefinition> plants = [] {
    std::map<std::string, PlantDefinition> t;
    t["double_integrator"] = PlantDefinition{
        2, 1,
        [](const Vec& x, const Vec& u, Vec& dx) {
          dx[0] = x[1];
          dx[1] = u[0];
        }};
    t["pendulum"] = PlantDefinition{
        2, 1,
        [](const Vec& x, const Vec& u, Vec& dx) {
          dx[0] = x[1];
          dx[1] = -std::sin(x[0]) - 0.2 * x[1] + u[0];
        }};
    t["scalar_linear"] = PlantDefinition{
        1, 1,
        [](const Vec& x, const Vec& u, Vec& dx) { dx[0] = -x[0] + u[0]; }};
    return t;
  }();
  return plants;
}

}  // namespace

void register_plant(const std::string& name, PlantDefinition def) {
  if (!def.vector_field || def.state_dim <= 0 || def.input_dim <= 0)
    throw ConfigError("register_plant: incomplete definition for '" + name + "'");
  table()[name] = std::move(def);
}

std::vector<std::string> registered_plants() {
  std::vector<std::string> names;
  for (const auto& [name, def] : table()) names.push_back(name);
  return names;
}

PlantModel make_plant(const std::string& name, const PlantConfig& config) {
  auto it = table().find(name);
  if (it == table().end())
    throw ConfigError("unknown plant '" + name + "'");
  const PlantDefinition& def = it->second;

  if (config.state_weights.size() != def.state_dim ||
      config.input_weights.size() != def.input_dim)
    throw ConfigError("plant '" + name + "': weight vector sizes must match dimensions");
  for (int i = 0; i < config.state_weights.size(); ++i)
    if (config.state_weights[i] < 0.0)
      throw ConfigError("plant '" + name + "': negative state weight");
  for (int i = 0; i < config.input_weights.size(); ++i)
    if (config.input_weights[i] < 0.0)
      throw ConfigError("plant '" + name + "': negative input weight");

  PlantModel model;
  model.state_dim = def.state_dim;
  model.input_dim = def.input_dim;
  model.vector_field = def.vector_field;
  const Vec q = config.state_weights;
  const Vec r = config.input_weights;
  model.deviation_cost = [q, r](const Vec& ex, const Vec& eu) {
    double c = 0.0;
    for (int i = 0; i < q.size(); ++i) c += q[i] * ex[i] * ex[i];
    for (int i = 0; i < r.size(); ++i) c += r[i] * eu[i] * eu[i];
    return c;
  };
  model.input_lower = config.input_lower;
  model.input_upper = config.input_upper;
  model.x_ref = config.x_ref;
  model.u_ref = config.u_ref;
  model.sample_state_lower = config.sample_state_lower;
  model.sample_state_upper = config.sample_state_upper;
  validate_plant(model);
  return model;
}

}  // namespace stmpc
