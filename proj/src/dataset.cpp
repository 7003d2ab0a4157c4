#include "sgp/dataset.hpp"

#include <cmath>
#include <cstring>

namespace sgp {

Dataset::Dataset(Matrix x, Eigen::VectorXd y, DistanceMetric metric)
    : x_(std::move(x)), y_(std::move(y)), metric_(std::move(metric)) {
  if (x_.rows() < 1) throw InputError("dataset: needs at least one point");
  if (x_.cols() < 1) throw InputError("dataset: needs dimension >= 1");
  if (y_.size() != x_.rows())
    throw InputError("dataset: observation count does not match point count");
  if (!x_.allFinite() || !y_.allFinite())
    throw InputError("dataset: inputs and observations must be finite");
  if (!metric_.ard_scales.empty()) {
    if (static_cast<Index>(metric_.ard_scales.size()) != x_.cols())
      throw InputError("dataset: ARD scale count does not match dimension");
    for (double s : metric_.ard_scales)
      if (!(s > 0.0)) throw InputError("dataset: ARD scales must be positive");
  }
}

Point Dataset::point(Index i) const {
  if (i < 0 || i >= n()) throw InputError("dataset: point index out of range");
  std::vector<double> coords(static_cast<std::size_t>(dim()));
  for (int k = 0; k < dim(); ++k) coords[static_cast<std::size_t>(k)] = x_(i, k);
  return Point(std::move(coords), i);
}

namespace {

class Fnv1a {
 public:
  void add(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void add_value(const T& v) {
    add(&v, sizeof(T));
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::string dataset_fingerprint(const Dataset& data) {
  Fnv1a h;
  h.add_value(data.n());
  h.add_value(static_cast<Index>(data.dim()));
  h.add_value(static_cast<int>(data.metric().norm));
  for (double s : data.metric().ard_scales) h.add_value(s);
  h.add(data.x().data(), sizeof(double) * static_cast<std::size_t>(
                             data.x().rows() * data.x().cols()));
  h.add(data.y().data(), sizeof(double) * static_cast<std::size_t>(data.n()));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h.value()));
  return std::string(buf);
}

BoundNoise BoundNoise::bind(const NoiseModel& model,
                            const ParameterSpace& space, int dim) {
  BoundNoise b;
  b.kind_ = model.kind;
  switch (model.kind) {
    case NoiseModel::Kind::kConstant:
      b.slot_ = space.require(model.slot);
      break;
    case NoiseModel::Kind::kPerPoint:
      for (Index i = 0; i < model.per_point.size(); ++i)
        if (!(model.per_point[i] >= 0.0))
          throw InputError("noise: per-point variances must be nonnegative");
      b.per_point_ = model.per_point;
      break;
    case NoiseModel::Kind::kParametric:
      b.field_ = BoundField::bind(model.field, FieldRole::kScalar, space, dim);
      break;
  }
  return b;
}

Eigen::VectorXd BoundNoise::variances(const double* theta,
                                      PointSet points) const {
  switch (kind_) {
    case NoiseModel::Kind::kConstant:
      return Eigen::VectorXd::Constant(points.n, std::exp(theta[slot_]));
    case NoiseModel::Kind::kPerPoint:
      if (per_point_.size() != points.n)
        throw InputError("noise: per-point variance length mismatch");
      return per_point_;
    case NoiseModel::Kind::kParametric: {
      Eigen::VectorXd v(points.n);
      for (Index i = 0; i < points.n; ++i)
        v[i] = field_.scalar(theta, points.point(i));
      return v;
    }
  }
  throw InputError("noise: unknown kind");
}

double BoundNoise::variance_at(const double* theta, PointRef x) const {
  switch (kind_) {
    case NoiseModel::Kind::kConstant:
      return std::exp(theta[slot_]);
    case NoiseModel::Kind::kPerPoint:
      throw InputError(
          "noise: per-point model has no variance at off-dataset locations");
    case NoiseModel::Kind::kParametric:
      return field_.scalar(theta, x);
  }
  throw InputError("noise: unknown kind");
}

BoundMean BoundMean::bind(const MeanFunction& model,
                          const ParameterSpace& space) {
  BoundMean b;
  b.kind_ = model.kind;
  if (model.kind == MeanFunction::Kind::kConstant)
    b.slot_ = space.require(model.slot);
  if (model.kind == MeanFunction::Kind::kPlugIn) {
    if (!model.plug_in)
      throw InputError("mean: plug-in kind requires a callable");
    b.plug_in_ = model.plug_in;
  }
  return b;
}

double BoundMean::at(const double* theta, PointRef x) const {
  switch (kind_) {
    case MeanFunction::Kind::kZero:
      return 0.0;
    case MeanFunction::Kind::kConstant:
      return theta[slot_];
    case MeanFunction::Kind::kPlugIn: {
      const double v = plug_in_(x, theta);
      if (!std::isfinite(v))
        throw EvaluationError("mean: plug-in produced a non-finite value");
      return v;
    }
  }
  return 0.0;
}

Eigen::VectorXd BoundMean::over(const double* theta, PointSet points) const {
  Eigen::VectorXd m(points.n);
  for (Index i = 0; i < points.n; ++i) m[i] = at(theta, points.point(i));
  return m;
}

}  // namespace sgp
