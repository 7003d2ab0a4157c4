#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

#include "sgp/fields.hpp"
#include "sgp/geometry.hpp"
#include "sgp/parameters.hpp"

namespace sgp {

// Training data: n input points (row-major, point i carries index i),
// observations y, and the distance metric the kernels should use.
class Dataset {
 public:
  using Matrix =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Dataset(Matrix x, Eigen::VectorXd y, DistanceMetric metric = {});

  Index n() const { return x_.rows(); }
  int dim() const { return static_cast<int>(x_.cols()); }
  const Matrix& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  const DistanceMetric& metric() const { return metric_; }

  PointSet points() const { return {x_.data(), n(), dim()}; }
  Point point(Index i) const;

 private:
  Matrix x_;
  Eigen::VectorXd y_;
  DistanceMetric metric_;
};

// FNV-1a content hash over dimensions, metric and data bytes; identifies the
// training data a checkpoint was built from.
std::string dataset_fingerprint(const Dataset& data);

// Observation noise variances V (diagonal). Constant and parametric kinds use
// an exponential link on raw hyperparameters so any in-bounds raw value maps
// to a positive variance.
struct NoiseModel {
  enum class Kind { kConstant, kPerPoint, kParametric };
  Kind kind = Kind::kConstant;
  std::string slot;            // kConstant: raw log-variance slot
  Eigen::VectorXd per_point;   // kPerPoint: fixed variances
  ParametricField field;       // kParametric: variance = field value (> 0)
};

class BoundNoise {
 public:
  static BoundNoise bind(const NoiseModel& model, const ParameterSpace& space,
                         int dim);

  Eigen::VectorXd variances(const double* theta, PointSet points) const;
  // Variance at an arbitrary location (prediction y-variance). Per-point
  // noise has no off-dataset value and throws InputError.
  double variance_at(const double* theta, PointRef x) const;

  NoiseModel::Kind kind() const { return kind_; }

 private:
  NoiseModel::Kind kind_ = NoiseModel::Kind::kConstant;
  int slot_ = -1;
  Eigen::VectorXd per_point_;
  BoundField field_;
};

// Prior mean m(x). The plug-in kind accepts any pure function of the location
// and the hyperparameters.
struct MeanFunction {
  enum class Kind { kZero, kConstant, kPlugIn };
  Kind kind = Kind::kZero;
  std::string slot;  // kConstant: mean value slot (identity link)
  std::function<double(PointRef, const double*)> plug_in;
};

class BoundMean {
 public:
  static BoundMean bind(const MeanFunction& model, const ParameterSpace& space);

  double at(const double* theta, PointRef x) const;
  Eigen::VectorXd over(const double* theta, PointSet points) const;

 private:
  MeanFunction::Kind kind_ = MeanFunction::Kind::kZero;
  int slot_ = -1;
  std::function<double(PointRef, const double*)> plug_in_;
};

}  // namespace sgp
