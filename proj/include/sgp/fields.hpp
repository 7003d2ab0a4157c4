#pragma once

#include <string>
#include <vector>

#include "sgp/geometry.hpp"
#include "sgp/parameters.hpp"

namespace sgp {

enum class FieldKind { kConstant, kAxisLinear, kRadialExpansion };
enum class FieldRole { kScalar, kDiagonal };

// A positive-valued function of the input location, parameterized by raw
// hyperparameter slots through an exponential link (raw parameters are
// unconstrained; outputs are always > 0). Scalar fields model spatially
// varying signal standard deviations; diagonal fields model axis-aligned
// squared length scales.
//
// Raw parameter layout (d = input dimension):
//   scalar   constant          [c]              exp(c)
//   scalar   axis-linear       [c, w_0..w_{d-1}] exp(c + w.x)
//   scalar   radial-expansion  [c, w]           exp(c + w*|x - center|)
//   diagonal constant          [c] or [c_0..c_{d-1}]   entry_k = exp(c_k)
//   diagonal axis-linear       [c_0..c_{d-1}, w_0..w_{d-1}] entry_k = exp(c_k + w.x)
//   diagonal radial-expansion  [c_0..c_{d-1}, w] entry_k = exp(c_k + w*|x - center|)
struct ParametricField {
  FieldKind kind = FieldKind::kConstant;
  std::vector<std::string> params;
  std::vector<double> center;  // radial-expansion origin; defaults to 0
};

// A field with slot references resolved against a ParameterSpace.
class BoundField {
 public:
  BoundField() = default;

  static BoundField bind(const ParametricField& field, FieldRole role,
                         const ParameterSpace& space, int dim);

  bool empty() const { return slots_.empty(); }
  int dim() const { return dim_; }

  // Scalar-role evaluation. Throws EvaluationError on non-finite output.
  double scalar(const double* theta, PointRef x) const;

  // Diagonal-role evaluation; writes dim() entries into out.
  void diagonal(const double* theta, PointRef x, double* out) const;

 private:
  FieldKind kind_ = FieldKind::kConstant;
  FieldRole role_ = FieldRole::kScalar;
  int dim_ = 0;
  std::vector<int> slots_;
  std::vector<double> center_;

  double exponent_tail(const double* theta, PointRef x, int slope_begin) const;
};

}  // namespace sgp
