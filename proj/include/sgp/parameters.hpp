#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "sgp/errors.hpp"

namespace sgp {

// Hyperparameter values in slot order.
using Theta = Eigen::VectorXd;

struct ParameterSlot {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

// Ordered, named hyperparameter slots with bounds. Kernel specs, noise and
// mean models reference slots by name; MCMC blocks reference them by name
// through the config. Immutable once a kernel is bound against it.
class ParameterSpace {
 public:
  int add(ParameterSlot slot);

  int size() const { return static_cast<int>(slots_.size()); }
  const ParameterSlot& slot(int i) const { return slots_.at(i); }
  const std::vector<ParameterSlot>& slots() const { return slots_; }

  // Index of a named slot, -1 if absent.
  int find(const std::string& name) const;
  // Index of a named slot; throws HyperparameterError if absent.
  int require(const std::string& name) const;

  Theta midpoint() const;
  bool in_bounds(const Theta& theta) const;

 private:
  std::vector<ParameterSlot> slots_;
  std::unordered_map<std::string, int> by_name_;
};

}  // namespace sgp
