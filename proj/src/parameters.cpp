#include "sgp/parameters.hpp"

namespace sgp {

int ParameterSpace::add(ParameterSlot slot) {
  if (slot.name.empty())
    throw HyperparameterError("parameter slot needs a name");
  if (!(slot.lo < slot.hi))
    throw HyperparameterError("parameter slot '" + slot.name +
                              "': lower bound must be below upper bound");
  if (by_name_.count(slot.name))
    throw HyperparameterError("duplicate parameter slot '" + slot.name + "'");
  int idx = static_cast<int>(slots_.size());
  by_name_.emplace(slot.name, idx);
  slots_.push_back(std::move(slot));
  return idx;
}

int ParameterSpace::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? -1 : it->second;
}

int ParameterSpace::require(const std::string& name) const {
  int idx = find(name);
  if (idx < 0)
    throw HyperparameterError("unresolved hyperparameter slot '" + name + "'");
  return idx;
}

Theta ParameterSpace::midpoint() const {
  Theta t(size());
  for (int i = 0; i < size(); ++i) t[i] = 0.5 * (slots_[i].lo + slots_[i].hi);
  return t;
}

bool ParameterSpace::in_bounds(const Theta& theta) const {
  if (theta.size() != size()) return false;
  for (int i = 0; i < size(); ++i)
    if (theta[i] < slots_[i].lo || theta[i] > slots_[i].hi) return false;
  return true;
}

}  // namespace sgp
