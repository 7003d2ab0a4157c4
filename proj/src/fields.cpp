#include "sgp/fields.hpp"

#include <cmath>

namespace sgp {
namespace {

int expected_params(FieldKind kind, FieldRole role, int dim, int given) {
  switch (kind) {
    case FieldKind::kConstant:
      if (role == FieldRole::kScalar) return 1;
      return given == 1 ? 1 : dim;  // isotropic or per-axis
    case FieldKind::kAxisLinear:
      return role == FieldRole::kScalar ? 1 + dim : 2 * dim;
    case FieldKind::kRadialExpansion:
      return role == FieldRole::kScalar ? 2 : dim + 1;
  }
  return -1;
}

const char* kind_name(FieldKind k) {
  switch (k) {
    case FieldKind::kConstant: return "constant";
    case FieldKind::kAxisLinear: return "axis-linear";
    case FieldKind::kRadialExpansion: return "radial-expansion";
  }
  return "?";
}

}  // namespace

BoundField BoundField::bind(const ParametricField& field, FieldRole role,
                            const ParameterSpace& space, int dim) {
  BoundField b;
  b.kind_ = field.kind;
  b.role_ = role;
  b.dim_ = dim;
  int want = expected_params(field.kind, role, dim,
                             static_cast<int>(field.params.size()));
  if (static_cast<int>(field.params.size()) != want)
    throw HyperparameterError(
        std::string(kind_name(field.kind)) + " field expects " +
        std::to_string(want) + " raw parameters, got " +
        std::to_string(field.params.size()));
  for (const auto& name : field.params) b.slots_.push_back(space.require(name));
  b.center_ = field.center;
  if (field.kind == FieldKind::kRadialExpansion && b.center_.empty())
    b.center_.assign(static_cast<std::size_t>(dim), 0.0);
  if (field.kind == FieldKind::kRadialExpansion &&
      static_cast<int>(b.center_.size()) != dim)
    throw HyperparameterError("radial-expansion center dimension mismatch");
  return b;
}

double BoundField::exponent_tail(const double* theta, PointRef x,
                                 int slope_begin) const {
  if (kind_ == FieldKind::kAxisLinear) {
    double acc = 0.0;
    for (int k = 0; k < dim_; ++k)
      acc += theta[slots_[slope_begin + k]] * x[k];
    return acc;
  }
  if (kind_ == FieldKind::kRadialExpansion) {
    double r2 = 0.0;
    for (int k = 0; k < dim_; ++k) {
      double d = x[k] - center_[k];
      r2 += d * d;
    }
    return theta[slots_[slope_begin]] * std::sqrt(r2);
  }
  return 0.0;
}

double BoundField::scalar(const double* theta, PointRef x) const {
  double v = std::exp(theta[slots_[0]] + exponent_tail(theta, x, 1));
  if (!std::isfinite(v))
    throw EvaluationError("parametric field produced a non-finite value");
  return v;
}

void BoundField::diagonal(const double* theta, PointRef x, double* out) const {
  const int n_base =
      (kind_ == FieldKind::kConstant && slots_.size() == 1) ? 1 : dim_;
  const double tail = exponent_tail(theta, x, n_base);
  for (int k = 0; k < dim_; ++k) {
    double c = theta[slots_[n_base == 1 ? 0 : k]];
    out[k] = std::exp(c + tail);
    if (!std::isfinite(out[k]))
      throw EvaluationError("parametric field produced a non-finite value");
  }
}

}  // namespace sgp
