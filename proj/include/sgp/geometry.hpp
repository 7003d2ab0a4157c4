#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sgp/errors.hpp"

namespace sgp {

using Index = std::int64_t;

// Sentinel for points that carry no dataset identity (e.g. prediction
// inputs). Delta kernels evaluate to zero on such points.
inline constexpr Index kNoIndex = -1;

struct Point {
  std::vector<double> coords;
  std::optional<Index> index;

  Point() = default;
  explicit Point(std::vector<double> c) : coords(std::move(c)) {}
  Point(std::vector<double> c, Index idx) : coords(std::move(c)), index(idx) {}
  int dim() const { return static_cast<int>(coords.size()); }
};

// Non-owning view used on evaluation hot paths.
struct PointRef {
  const double* coords = nullptr;
  int dim = 0;
  Index index = kNoIndex;

  double operator[](int k) const { return coords[k]; }
};

inline PointRef ref(const Point& p) {
  return {p.coords.data(), p.dim(), p.index.value_or(kNoIndex)};
}

enum class Norm { kEuclidean, kL1 };

// Distance with optional per-dimension (ARD) scales applied as coordinate
// division before the norm.
struct DistanceMetric {
  Norm norm = Norm::kEuclidean;
  std::vector<double> ard_scales;  // empty = unit scales

  double operator()(PointRef a, PointRef b) const {
    if (a.dim != b.dim) throw InputError("distance: dimension mismatch");
    const bool ard = !ard_scales.empty();
    if (ard && static_cast<int>(ard_scales.size()) != a.dim)
      throw InputError("distance: ARD scale count does not match dimension");
    double acc = 0.0;
    if (norm == Norm::kEuclidean) {
      for (int k = 0; k < a.dim; ++k) {
        double d = a.coords[k] - b.coords[k];
        if (ard) d /= ard_scales[k];
        acc += d * d;
      }
      return std::sqrt(acc);
    }
    for (int k = 0; k < a.dim; ++k) {
      double d = std::abs(a.coords[k] - b.coords[k]);
      if (ard) d /= ard_scales[k];
      acc += d;
    }
    return acc;
  }
};

inline double distance(const Point& a, const Point& b,
                       const DistanceMetric& m = {}) {
  return m(ref(a), ref(b));
}

// Flat row-major view over n points. Point i carries dataset index i.
struct PointSet {
  const double* data = nullptr;
  Index n = 0;
  int dim = 0;

  PointRef point(Index i) const { return {data + i * dim, dim, i}; }
};

}  // namespace sgp
