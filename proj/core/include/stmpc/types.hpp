#ifndef STMPC_TYPES_HPP
#define STMPC_TYPES_HPP

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace stmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Numerical integration produced a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int substep)
      : std::runtime_error(what), substep_(substep) {}
  int substep() const { return substep_; }

 private:
  int substep_;
};

/// A scenario or model violates a construction-time invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The very first optimal control problem of a closed-loop run is infeasible,
/// i.e. the initial (state, resource) pair lies outside the feasible set.
class InfeasibleStartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stmpc

#endif
