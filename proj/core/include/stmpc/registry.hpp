#ifndef STMPC_REGISTRY_HPP
#define STMPC_REGISTRY_HPP

#include <string>
#include <vector>

#include "stmpc/dynamics.hpp"

namespace stmpc {

/// Numeric configuration for a registered plant: reference pair, input box,
/// quadratic deviation-cost weights and the optional per-sample state box.
struct PlantConfig {
  Vec x_ref;
  Vec u_ref;
  Vec input_lower;
  Vec input_upper;
  Vec state_weights;  // one nonnegative weight per state coordinate
  Vec input_weights;  // one nonnegative weight per input coordinate
  std::optional<Vec> sample_state_lower;
  std::optional<Vec> sample_state_upper;
};

/// Dimensions and vector field of a registered plant family.
struct PlantDefinition {
  int state_dim = 0;
  int input_dim = 0;
  std::function<void(const Vec& x, const Vec& u, Vec& dx)> vector_field;
};

/// Registers a plant family under a name. Built-ins: "double_integrator",
/// "pendulum", "scalar_linear". Registration is not thread-safe; do it at
/// startup.
void register_plant(const std::string& name, PlantDefinition def);

std::vector<std::string> registered_plants();

/// Builds a validated PlantModel from a registered family and its numeric
/// configuration (quadratic deviation cost from the weight vectors). Throws
/// ConfigError for unknown names, dimension mismatches or invariant failures.
PlantModel make_plant(const std::string& name, const PlantConfig& config);

}  // namespace stmpc

#endif
