#include "sgp/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace sgp {

namespace {
constexpr double kSqrt3 = 1.7320508075688772;
}

double wendland(double d, double r0, WendlandForm form) {
  if (!(r0 > 0.0))
    throw HyperparameterError("wendland: support radius must be positive");
  if (!(d >= 0.0)) throw EvaluationError("wendland: invalid distance");
  if (d >= r0) return 0.0;
  const double t = d / r0;
  const double c3 = (form == WendlandForm::kClassical) ? 32.0 : 35.0;
  const double u = 1.0 - t;
  const double u2 = u * u;
  const double u4 = u2 * u2;
  return (u4 * u4) * (((c3 * t + 25.0) * t + 8.0) * t + 1.0);
}

double matern32(double d, double length, double sigma) {
  if (!(length > 0.0) || !(sigma > 0.0))
    throw HyperparameterError("matern32: length and sigma must be positive");
  if (!(d >= 0.0)) throw EvaluationError("matern32: invalid distance");
  const double s = kSqrt3 * d / length;
  return sigma * sigma * (1.0 + s) * std::exp(-s);
}

namespace {

// Core bump profile of the distance from the center. The support condition is
// dist < radius; the term 1 - dist^2/radius^2 is clamped below before the
// inversion so boundary evaluations underflow to zero instead of overflowing.
inline double bump_value(double dist, double amplitude, double shape,
                         double radius) {
  if (dist >= radius) return 0.0;
  double s = 1.0 - (dist * dist) / (radius * radius);
  if (s < 1e-14) s = 1e-14;
  return amplitude * std::exp(shape * (1.0 - 1.0 / s));
}

}  // namespace

double bump_eval(const BumpFunction& b, PointRef x,
                 const DistanceMetric& metric) {
  if (!(b.amplitude >= 0.0))
    throw HyperparameterError("bump: amplitude must be nonnegative");
  if (!(b.shape > 0.0) || !(b.radius > 0.0))
    throw HyperparameterError("bump: shape and radius must be positive");
  return bump_value(metric(ref(b.center), x), b.amplitude, b.shape, b.radius);
}

// ---------------------------------------------------------------------------
// Bound evaluation tree
// ---------------------------------------------------------------------------

namespace detail {

// Per-(theta, dataset) immutable cache attached to an EvalContext slot.
struct NodeCache {
  Index n = 0;
  // Field caches (nonstat / split nodes), one row per dataset point.
  Eigen::VectorXd sigma;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> diag;
  Eigen::VectorXd det_quarter;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> diag2;
  Eigen::VectorXd det_quarter2;
  bool has_fields = false;
  // Delta membership: per dataset index, the sorted list of groups (radius
  // rule: neighbor identities) containing it.
  std::vector<std::vector<Index>> membership;
  bool has_membership = false;
};

}  // namespace detail

namespace {

using detail::NodeCache;
using CacheVec = std::vector<std::shared_ptr<const NodeCache>>;

struct BoundParam {
  int slot = -1;
  double fixed = 0.0;
  double value(const double* theta) const {
    return slot >= 0 ? theta[slot] : fixed;
  }
};

BoundParam bind_param(const ParamRef& r, const ParameterSpace& space) {
  BoundParam b;
  if (r.is_slot())
    b.slot = space.require(r.slot);
  else
    b.fixed = r.fixed;
  return b;
}

thread_local std::vector<double> tls_scratch;

}  // namespace

class EvalNode {
 public:
  virtual ~EvalNode() = default;
  virtual double eval(const double* theta, const CacheVec& caches, PointRef a,
                      PointRef b) const = 0;
  // Structural positivity checks beyond plain bounds.
  virtual void validate(const double*) const {}
  // Builds theta/dataset-dependent caches. pts.n == 0 means "no dataset".
  virtual void prepare(const double*, PointSet, CacheVec&) const {}
  virtual void collect_amplitude_slots(std::vector<int>&) const {}
};

namespace {

class WendlandEval final : public EvalNode {
 public:
  WendlandEval(BoundParam r0, WendlandForm form, DistanceMetric metric)
      : r0_(r0), form_(form), metric_(std::move(metric)) {}

  double eval(const double* th, const CacheVec&, PointRef a,
              PointRef b) const override {
    return wendland(metric_(a, b), r0_.value(th), form_);
  }

  void validate(const double* th) const override {
    if (!(r0_.value(th) > 0.0))
      throw HyperparameterError("wendland: support radius must be positive");
  }

 private:
  BoundParam r0_;
  WendlandForm form_;
  DistanceMetric metric_;
};

class Matern32Eval final : public EvalNode {
 public:
  Matern32Eval(BoundParam length, BoundParam sigma, DistanceMetric metric)
      : length_(length), sigma_(sigma), metric_(std::move(metric)) {}

  double eval(const double* th, const CacheVec&, PointRef a,
              PointRef b) const override {
    return matern32(metric_(a, b), length_.value(th), sigma_.value(th));
  }

  void validate(const double* th) const override {
    if (!(length_.value(th) > 0.0) || !(sigma_.value(th) > 0.0))
      throw HyperparameterError("matern32: length and sigma must be positive");
  }

 private:
  BoundParam length_, sigma_;
  DistanceMetric metric_;
};

// Convolution-form prefactor shared by the nonstat and split kernels:
//   s(a) s(b) |S(a)|^{1/4} |S(b)|^{1/4} / |(S(a)+S(b))/2|^{1/2}
// over diagonal S. All expressions are grouped so that swapping the arguments
// produces bit-identical results.
class NonstatWendlandEval final : public EvalNode {
 public:
  NonstatWendlandEval(BoundField signal, BoundField length, BoundParam r0,
                      WendlandForm form, int dim, int cache_id)
      : signal_(std::move(signal)),
        length_(std::move(length)),
        r0_(r0),
        form_(form),
        dim_(dim),
        cache_id_(cache_id) {}

  double eval(const double* th, const CacheVec& caches, PointRef a,
              PointRef b) const override {
    const NodeCache* cache =
        caches.empty() ? nullptr : caches[cache_id_].get();
    if (cache && !cache->has_fields) cache = nullptr;

    tls_scratch.resize(static_cast<std::size_t>(4 * dim_));
    double* buf_a = tls_scratch.data();
    double* buf_b = tls_scratch.data() + dim_;

    double sa, sb, qa, qb;
    const double *la, *lb;
    point_values(th, cache, a, buf_a, sa, qa, la);
    point_values(th, cache, b, buf_b, sb, qb, lb);

    const double r0 = r0_.value(th);
    double q = 0.0;
    for (int k = 0; k < dim_; ++k) {
      const double diff = a[k] - b[k];
      q += (diff * diff) * (2.0 / (la[k] + lb[k]));
    }
    if (!(q >= 0.0) || !std::isfinite(q))
      throw EvaluationError("nonstat wendland: non-finite quadratic form");
    const double sd = std::sqrt(q);
    if (sd >= r0) return 0.0;

    double avg_det = 1.0;
    for (int k = 0; k < dim_; ++k) avg_det *= 0.5 * (la[k] + lb[k]);
    const double pref = (sa * sb) * (qa * qb) / std::sqrt(avg_det);
    return pref * wendland(sd, r0, form_);
  }

  void validate(const double* th) const override {
    if (!(r0_.value(th) > 0.0))
      throw HyperparameterError(
          "nonstat wendland: support radius must be positive");
  }

  void prepare(const double* th, PointSet pts, CacheVec& caches) const override {
    if (pts.n == 0) return;
    auto cache = std::make_shared<NodeCache>();
    cache->n = pts.n;
    cache->sigma.resize(pts.n);
    cache->diag.resize(pts.n, dim_);
    cache->det_quarter.resize(pts.n);
    std::vector<double> row(static_cast<std::size_t>(dim_));
    for (Index i = 0; i < pts.n; ++i) {
      PointRef p = pts.point(i);
      cache->sigma[i] = signal_.scalar(th, p);
      length_.diagonal(th, p, row.data());
      double det = 1.0;
      for (int k = 0; k < dim_; ++k) {
        cache->diag(i, k) = row[k];
        det *= row[k];
      }
      cache->det_quarter[i] = std::pow(det, 0.25);
    }
    cache->has_fields = true;
    caches[cache_id_] = std::move(cache);
  }

 private:
  void point_values(const double* th, const NodeCache* cache, PointRef x,
                    double* scratch, double& sigma, double& det_quarter,
                    const double*& diag) const {
    if (cache && x.index >= 0 && x.index < cache->n) {
      sigma = cache->sigma[x.index];
      det_quarter = cache->det_quarter[x.index];
      diag = cache->diag.row(x.index).data();
      return;
    }
    sigma = signal_.scalar(th, x);
    length_.diagonal(th, x, scratch);
    double det = 1.0;
    for (int k = 0; k < dim_; ++k) det *= scratch[k];
    det_quarter = std::pow(det, 0.25);
    diag = scratch;
  }

  BoundField signal_, length_;
  BoundParam r0_;
  WendlandForm form_;
  int dim_;
  int cache_id_;
};

struct FlatBump {
  std::vector<BoundParam> center;
  BoundParam amplitude, shape, radius;
};

class BumpFarfieldEval final : public EvalNode {
 public:
  BumpFarfieldEval(std::vector<std::vector<FlatBump>> groups, int dim,
                   DistanceMetric metric)
      : groups_(std::move(groups)), dim_(dim), metric_(std::move(metric)) {}

  double eval(const double* th, const CacheVec&, PointRef a,
              PointRef b) const override {
    double acc = 0.0;
    for (const auto& group : groups_) {
      const double ga = group_value(th, group, a);
      if (ga == 0.0) continue;
      const double gb = group_value(th, group, b);
      acc += ga * gb;
    }
    return acc;
  }

  void validate(const double* th) const override {
    for (const auto& group : groups_)
      for (const auto& bump : group) {
        if (!(bump.amplitude.value(th) >= 0.0))
          throw HyperparameterError("bump: amplitude must be nonnegative");
        if (!(bump.shape.value(th) > 0.0) || !(bump.radius.value(th) > 0.0))
          throw HyperparameterError("bump: shape and radius must be positive");
      }
  }

  void collect_amplitude_slots(std::vector<int>& out) const override {
    for (const auto& group : groups_)
      for (const auto& bump : group)
        if (bump.amplitude.slot >= 0) out.push_back(bump.amplitude.slot);
  }

 private:
  double group_value(const double* th, const std::vector<FlatBump>& group,
                     PointRef x) const {
    tls_scratch.resize(static_cast<std::size_t>(dim_));
    double* c = tls_scratch.data();
    double acc = 0.0;
    for (const auto& bump : group) {
      const double amp = bump.amplitude.value(th);
      if (amp == 0.0) continue;
      for (int k = 0; k < dim_; ++k) c[k] = bump.center[k].value(th);
      const double dist = metric_(PointRef{c, dim_, kNoIndex}, x);
      acc += bump_value(dist, amp, bump.shape.value(th), bump.radius.value(th));
    }
    return acc;
  }

  std::vector<std::vector<FlatBump>> groups_;
  int dim_;
  DistanceMetric metric_;
};

class DeltaFarfieldEval final : public EvalNode {
 public:
  // Explicit groups.
  DeltaFarfieldEval(const std::vector<std::vector<Index>>& groups) {
    Index max_index = -1;
    for (const auto& g : groups)
      for (Index i : g) {
        if (i < 0) throw InputError("delta group: negative member index");
        max_index = std::max(max_index, i);
      }
    explicit_membership_.resize(static_cast<std::size_t>(max_index + 1));
    for (std::size_t gid = 0; gid < groups.size(); ++gid)
      for (Index i : groups[gid])
        explicit_membership_[static_cast<std::size_t>(i)].push_back(
            static_cast<Index>(gid));
  }

  // Radius rule: one group per dataset point, membership by distance.
  DeltaFarfieldEval(BoundParam radius, DistanceMetric metric, int cache_id)
      : radius_rule_(true),
        radius_(radius),
        metric_(std::move(metric)),
        cache_id_(cache_id) {}

  double eval(const double* th, const CacheVec& caches, PointRef a,
              PointRef b) const override {
    (void)th;
    if (a.index < 0 || b.index < 0) return 0.0;
    if (radius_rule_) {
      const NodeCache* cache =
          caches.empty() ? nullptr : caches[cache_id_].get();
      if (!cache || !cache->has_membership)
        throw EvaluationError(
            "delta radius rule requires a dataset-bound context");
      if (a.index >= cache->n || b.index >= cache->n)
        throw EvaluationError("delta kernel: point index outside the dataset");
      return intersection_size(cache->membership[a.index],
                               cache->membership[b.index]);
    }
    const auto& ma = membership_of(a.index);
    const auto& mb = membership_of(b.index);
    return intersection_size(ma, mb);
  }

  void validate(const double* th) const override {
    if (radius_rule_ && !(radius_.value(th) >= 0.0))
      throw HyperparameterError("delta radius rule: radius must be >= 0");
  }

  void prepare(const double* th, PointSet pts, CacheVec& caches) const override {
    if (!radius_rule_ || pts.n == 0) return;
    const double rho = radius_.value(th);
    auto cache = std::make_shared<NodeCache>();
    cache->n = pts.n;
    cache->membership.resize(static_cast<std::size_t>(pts.n));
    for (Index p = 0; p < pts.n; ++p) {
      PointRef xp = pts.point(p);
      for (Index i = 0; i < pts.n; ++i) {
        if (metric_(xp, pts.point(i)) <= rho)
          cache->membership[static_cast<std::size_t>(i)].push_back(p);
      }
    }
    cache->has_membership = true;
    caches[cache_id_] = std::move(cache);
  }

 private:
  static double intersection_size(const std::vector<Index>& x,
                                  const std::vector<Index>& y) {
    std::size_t i = 0, j = 0, count = 0;
    while (i < x.size() && j < y.size()) {
      if (x[i] < y[j])
        ++i;
      else if (y[j] < x[i])
        ++j;
      else {
        ++count;
        ++i;
        ++j;
      }
    }
    return static_cast<double>(count);
  }

  const std::vector<Index>& membership_of(Index i) const {
    static const std::vector<Index> kEmpty;
    if (i < 0 || i >= static_cast<Index>(explicit_membership_.size()))
      return kEmpty;
    return explicit_membership_[static_cast<std::size_t>(i)];
  }

  std::vector<std::vector<Index>> explicit_membership_;
  bool radius_rule_ = false;
  BoundParam radius_;
  DistanceMetric metric_;
  int cache_id_ = -1;
};

class SplitFarfieldEval final : public EvalNode {
 public:
  SplitFarfieldEval(BoundField signal, BoundField local_length,
                    BoundField far_length, BoundParam r0,
                    BoundParam matern_length,
                    std::vector<std::vector<FlatBump>> groups,
                    WendlandForm form, int dim, DistanceMetric metric,
                    int cache_id)
      : signal_(std::move(signal)),
        local_length_(std::move(local_length)),
        far_length_(std::move(far_length)),
        r0_(r0),
        matern_length_(matern_length),
        groups_(std::move(groups)),
        form_(form),
        dim_(dim),
        metric_(std::move(metric)),
        cache_id_(cache_id) {}

  double eval(const double* th, const CacheVec& caches, PointRef a,
              PointRef b) const override {
    const NodeCache* cache =
        caches.empty() ? nullptr : caches[cache_id_].get();
    if (cache && !cache->has_fields) cache = nullptr;

    tls_scratch.resize(static_cast<std::size_t>(5 * dim_));
    double* la_buf = tls_scratch.data();
    double* lb_buf = la_buf + dim_;
    double* pa_buf = lb_buf + dim_;
    double* pb_buf = pa_buf + dim_;
    double* cbuf = pb_buf + dim_;

    double sa, sb, qa, qb, pa, pb;
    const double *la, *lb, *fa, *fb;
    point_values(th, cache, a, la_buf, pa_buf, sa, qa, la, pa, fa);
    point_values(th, cache, b, lb_buf, pb_buf, sb, qb, lb, pb, fb);

    // Local Wendland part over the Q form.
    const double r0 = r0_.value(th);
    double q = 0.0;
    for (int k = 0; k < dim_; ++k) {
      const double diff = a[k] - b[k];
      q += (diff * diff) * (2.0 / (la[k] + lb[k]));
    }
    if (!(q >= 0.0) || !std::isfinite(q))
      throw EvaluationError("split kernel: non-finite quadratic form");
    double local = 0.0;
    const double sdq = std::sqrt(q);
    if (sdq < r0) {
      double avg_det = 1.0;
      for (int k = 0; k < dim_; ++k) avg_det *= 0.5 * (la[k] + lb[k]);
      local = (qa * qb) / std::sqrt(avg_det) * wendland(sdq, r0, form_);
    }

    // Far-field Matern part over the P form, gated by the bump groups.
    double far = 0.0;
    double gsum = 0.0;
    for (const auto& group : groups_) {
      const double ga = group_value(th, group, a, cbuf);
      if (ga == 0.0) continue;
      gsum += ga * group_value(th, group, b, cbuf);
    }
    if (gsum != 0.0) {
      double p = 0.0;
      for (int k = 0; k < dim_; ++k) {
        const double diff = a[k] - b[k];
        p += (diff * diff) * (2.0 / (fa[k] + fb[k]));
      }
      if (!(p >= 0.0) || !std::isfinite(p))
        throw EvaluationError("split kernel: non-finite quadratic form");
      double avg_det = 1.0;
      for (int k = 0; k < dim_; ++k) avg_det *= 0.5 * (fa[k] + fb[k]);
      const double ell = matern_length_.value(th);
      const double s = kSqrt3 * std::sqrt(p) / ell;
      far = (pa * pb) / std::sqrt(avg_det) * ((1.0 + s) * std::exp(-s)) * gsum;
    }

    return 0.5 * (sa * sb) * (local + far);
  }

  void validate(const double* th) const override {
    if (!(r0_.value(th) > 0.0))
      throw HyperparameterError("split kernel: support radius must be positive");
    if (!(matern_length_.value(th) > 0.0))
      throw HyperparameterError("split kernel: matern length must be positive");
    for (const auto& group : groups_)
      for (const auto& bump : group) {
        if (!(bump.amplitude.value(th) >= 0.0))
          throw HyperparameterError("bump: amplitude must be nonnegative");
        if (!(bump.shape.value(th) > 0.0) || !(bump.radius.value(th) > 0.0))
          throw HyperparameterError("bump: shape and radius must be positive");
      }
  }

  void prepare(const double* th, PointSet pts, CacheVec& caches) const override {
    if (pts.n == 0) return;
    auto cache = std::make_shared<NodeCache>();
    cache->n = pts.n;
    cache->sigma.resize(pts.n);
    cache->diag.resize(pts.n, dim_);
    cache->det_quarter.resize(pts.n);
    cache->diag2.resize(pts.n, dim_);
    cache->det_quarter2.resize(pts.n);
    std::vector<double> row(static_cast<std::size_t>(dim_));
    for (Index i = 0; i < pts.n; ++i) {
      PointRef p = pts.point(i);
      cache->sigma[i] = signal_.scalar(th, p);
      local_length_.diagonal(th, p, row.data());
      double det = 1.0;
      for (int k = 0; k < dim_; ++k) {
        cache->diag(i, k) = row[k];
        det *= row[k];
      }
      cache->det_quarter[i] = std::pow(det, 0.25);
      far_length_.diagonal(th, p, row.data());
      det = 1.0;
      for (int k = 0; k < dim_; ++k) {
        cache->diag2(i, k) = row[k];
        det *= row[k];
      }
      cache->det_quarter2[i] = std::pow(det, 0.25);
    }
    cache->has_fields = true;
    caches[cache_id_] = std::move(cache);
  }

  void collect_amplitude_slots(std::vector<int>& out) const override {
    for (const auto& group : groups_)
      for (const auto& bump : group)
        if (bump.amplitude.slot >= 0) out.push_back(bump.amplitude.slot);
  }

 private:
  void point_values(const double* th, const NodeCache* cache, PointRef x,
                    double* local_buf, double* far_buf, double& sigma,
                    double& local_det_quarter, const double*& local_diag,
                    double& far_det_quarter, const double*& far_diag) const {
    if (cache && x.index >= 0 && x.index < cache->n) {
      sigma = cache->sigma[x.index];
      local_det_quarter = cache->det_quarter[x.index];
      local_diag = cache->diag.row(x.index).data();
      far_det_quarter = cache->det_quarter2[x.index];
      far_diag = cache->diag2.row(x.index).data();
      return;
    }
    sigma = signal_.scalar(th, x);
    local_length_.diagonal(th, x, local_buf);
    double det = 1.0;
    for (int k = 0; k < dim_; ++k) det *= local_buf[k];
    local_det_quarter = std::pow(det, 0.25);
    local_diag = local_buf;
    far_length_.diagonal(th, x, far_buf);
    det = 1.0;
    for (int k = 0; k < dim_; ++k) det *= far_buf[k];
    far_det_quarter = std::pow(det, 0.25);
    far_diag = far_buf;
  }

  double group_value(const double* th, const std::vector<FlatBump>& group,
                     PointRef x, double* cbuf) const {
    double acc = 0.0;
    for (const auto& bump : group) {
      const double amp = bump.amplitude.value(th);
      if (amp == 0.0) continue;
      for (int k = 0; k < dim_; ++k) cbuf[k] = bump.center[k].value(th);
      const double dist = metric_(PointRef{cbuf, dim_, kNoIndex}, x);
      acc += bump_value(dist, amp, bump.shape.value(th), bump.radius.value(th));
    }
    return acc;
  }

  BoundField signal_, local_length_, far_length_;
  BoundParam r0_, matern_length_;
  std::vector<std::vector<FlatBump>> groups_;
  WendlandForm form_;
  int dim_;
  DistanceMetric metric_;
  int cache_id_;
};

class ProductEval final : public EvalNode {
 public:
  explicit ProductEval(std::vector<std::shared_ptr<const EvalNode>> children)
      : children_(std::move(children)) {}

  double eval(const double* th, const CacheVec& caches, PointRef a,
              PointRef b) const override {
    double acc = 1.0;
    for (const auto& child : children_) {
      const double v = child->eval(th, caches, a, b);
      if (v == 0.0) return 0.0;  // compact support dominates products
      acc *= v;
    }
    return acc;
  }

  void validate(const double* th) const override {
    for (const auto& c : children_) c->validate(th);
  }
  void prepare(const double* th, PointSet pts, CacheVec& caches) const override {
    for (const auto& c : children_) c->prepare(th, pts, caches);
  }
  void collect_amplitude_slots(std::vector<int>& out) const override {
    for (const auto& c : children_) c->collect_amplitude_slots(out);
  }

 private:
  std::vector<std::shared_ptr<const EvalNode>> children_;
};

class SumEval final : public EvalNode {
 public:
  explicit SumEval(std::vector<std::shared_ptr<const EvalNode>> children)
      : children_(std::move(children)) {}

  double eval(const double* th, const CacheVec& caches, PointRef a,
              PointRef b) const override {
    double acc = 0.0;
    for (const auto& child : children_) acc += child->eval(th, caches, a, b);
    return acc;
  }

  void validate(const double* th) const override {
    for (const auto& c : children_) c->validate(th);
  }
  void prepare(const double* th, PointSet pts, CacheVec& caches) const override {
    for (const auto& c : children_) c->prepare(th, pts, caches);
  }
  void collect_amplitude_slots(std::vector<int>& out) const override {
    for (const auto& c : children_) c->collect_amplitude_slots(out);
  }

 private:
  std::vector<std::shared_ptr<const EvalNode>> children_;
};

class ScaleEval final : public EvalNode {
 public:
  ScaleEval(BoundParam factor, std::shared_ptr<const EvalNode> child)
      : factor_(factor), child_(std::move(child)) {}

  double eval(const double* th, const CacheVec& caches, PointRef a,
              PointRef b) const override {
    return factor_.value(th) * child_->eval(th, caches, a, b);
  }

  void validate(const double* th) const override {
    if (!(factor_.value(th) > 0.0))
      throw HyperparameterError("scale: factor must be positive");
    child_->validate(th);
  }
  void prepare(const double* th, PointSet pts, CacheVec& caches) const override {
    child_->prepare(th, pts, caches);
  }
  void collect_amplitude_slots(std::vector<int>& out) const override {
    child_->collect_amplitude_slots(out);
  }

 private:
  BoundParam factor_;
  std::shared_ptr<const EvalNode> child_;
};

std::vector<FlatBump> bind_bump_group(const BumpGroupSpec& group,
                                      const ParameterSpace& space, int dim) {
  if (group.bumps.empty())
    throw HyperparameterError("bump group must contain at least one bump");
  std::vector<FlatBump> out;
  out.reserve(group.bumps.size());
  for (const auto& bump : group.bumps) {
    if (static_cast<int>(bump.center.size()) != dim)
      throw HyperparameterError("bump center dimension mismatch");
    FlatBump fb;
    for (const auto& c : bump.center) fb.center.push_back(bind_param(c, space));
    fb.amplitude = bind_param(bump.amplitude, space);
    fb.shape = bind_param(bump.shape, space);
    fb.radius = bind_param(bump.radius, space);
    out.push_back(std::move(fb));
  }
  return out;
}

struct Binder {
  const ParameterSpace& space;
  int dim;
  DistanceMetric metric;
  int next_cache_id = 0;

  std::shared_ptr<const EvalNode> bind(const KernelSpec& spec) {
    return std::visit([this](const auto& node) { return bind_node(node); },
                      spec.node);
  }

  std::shared_ptr<const EvalNode> bind_node(const WendlandNode& n) {
    return std::make_shared<WendlandEval>(bind_param(n.support_radius, space),
                                          n.form, metric);
  }

  std::shared_ptr<const EvalNode> bind_node(const Matern32Node& n) {
    return std::make_shared<Matern32Eval>(bind_param(n.length, space),
                                          bind_param(n.sigma, space), metric);
  }

  std::shared_ptr<const EvalNode> bind_node(const NonstatWendlandNode& n) {
    return std::make_shared<NonstatWendlandEval>(
        BoundField::bind(n.signal_field, FieldRole::kScalar, space, dim),
        BoundField::bind(n.length_field, FieldRole::kDiagonal, space, dim),
        bind_param(n.support_radius, space), n.form, dim, next_cache_id++);
  }

  std::shared_ptr<const EvalNode> bind_node(const BumpFarfieldNode& n) {
    if (n.groups.empty())
      throw HyperparameterError("bump far-field kernel needs >= 1 group");
    std::vector<std::vector<FlatBump>> groups;
    for (const auto& g : n.groups)
      groups.push_back(bind_bump_group(g, space, dim));
    return std::make_shared<BumpFarfieldEval>(std::move(groups), dim, metric);
  }

  std::shared_ptr<const EvalNode> bind_node(const DeltaFarfieldNode& n) {
    if (n.groups.radius_rule)
      return std::make_shared<DeltaFarfieldEval>(
          bind_param(n.groups.radius, space), metric, next_cache_id++);
    if (n.groups.explicit_groups.empty())
      throw HyperparameterError("delta far-field kernel needs >= 1 group");
    return std::make_shared<DeltaFarfieldEval>(n.groups.explicit_groups);
  }

  std::shared_ptr<const EvalNode> bind_node(const SplitFarfieldNode& n) {
    if (n.groups.empty())
      throw HyperparameterError("split far-field kernel needs >= 1 group");
    std::vector<std::vector<FlatBump>> groups;
    for (const auto& g : n.groups)
      groups.push_back(bind_bump_group(g, space, dim));
    return std::make_shared<SplitFarfieldEval>(
        BoundField::bind(n.signal_field, FieldRole::kScalar, space, dim),
        BoundField::bind(n.local_length_field, FieldRole::kDiagonal, space, dim),
        BoundField::bind(n.farfield_length_field, FieldRole::kDiagonal, space,
                         dim),
        bind_param(n.support_radius, space), bind_param(n.matern_length, space),
        std::move(groups), n.form, dim, metric, next_cache_id++);
  }

  std::shared_ptr<const EvalNode> bind_node(const ProductNode& n) {
    if (n.children.empty())
      throw HyperparameterError("product kernel needs >= 1 child");
    std::vector<std::shared_ptr<const EvalNode>> children;
    for (const auto& c : n.children) children.push_back(bind(c));
    return std::make_shared<ProductEval>(std::move(children));
  }

  std::shared_ptr<const EvalNode> bind_node(const SumNode& n) {
    if (n.children.empty())
      throw HyperparameterError("sum kernel needs >= 1 child");
    std::vector<std::shared_ptr<const EvalNode>> children;
    for (const auto& c : n.children) children.push_back(bind(c));
    return std::make_shared<SumEval>(std::move(children));
  }

  std::shared_ptr<const EvalNode> bind_node(const ScaleNode& n) {
    if (n.child.size() != 1)
      throw HyperparameterError("scale kernel needs exactly one child");
    return std::make_shared<ScaleEval>(bind_param(n.factor, space),
                                       bind(n.child.front()));
  }
};

}  // namespace

KernelSpec k_product(std::vector<KernelSpec> children) {
  return KernelSpec{ProductNode{std::move(children)}};
}

KernelSpec k_sum(std::vector<KernelSpec> children) {
  return KernelSpec{SumNode{std::move(children)}};
}

KernelSpec k_scale(ParamRef factor, KernelSpec child) {
  ScaleNode n;
  n.factor = std::move(factor);
  n.child.push_back(std::move(child));
  return KernelSpec{std::move(n)};
}

KernelSpec make_bump_grid(int groups, int bumps_per_group,
                          const std::vector<double>& lo,
                          const std::vector<double>& hi,
                          const std::vector<std::string>& amplitude_slots,
                          ParamRef shape, ParamRef radius) {
  if (groups < 1 || bumps_per_group < 1)
    throw InputError("make_bump_grid: need >= 1 group and >= 1 bump per group");
  const int dim = static_cast<int>(lo.size());
  if (hi.size() != lo.size())
    throw InputError("make_bump_grid: lo/hi dimension mismatch");
  const int total = groups * bumps_per_group;
  if (static_cast<int>(amplitude_slots.size()) != total)
    throw InputError("make_bump_grid: need one amplitude slot per bump");

  // Cells of a near-cubic lattice, centers at cell midpoints.
  int per_axis = 1;
  while (std::pow(per_axis, dim) < total) ++per_axis;
  BumpFarfieldNode node;
  int flat = 0;
  for (int u = 0; u < groups; ++u) {
    BumpGroupSpec group;
    for (int p = 0; p < bumps_per_group; ++p, ++flat) {
      BumpSpec bump;
      int cell = flat;
      for (int k = 0; k < dim; ++k) {
        const int pos = cell % per_axis;
        cell /= per_axis;
        const double step = (hi[k] - lo[k]) / per_axis;
        bump.center.emplace_back(lo[k] + (pos + 0.5) * step);
      }
      bump.amplitude = ParamRef(amplitude_slots[static_cast<std::size_t>(flat)]);
      bump.shape = shape;
      bump.radius = radius;
      group.bumps.push_back(std::move(bump));
    }
    node.groups.push_back(std::move(group));
  }
  return KernelSpec{std::move(node)};
}

BoundKernel bind_kernel(const KernelSpec& spec, const ParameterSpace& space,
                        int dim, DistanceMetric metric) {
  if (dim < 1) throw InputError("bind_kernel: dimension must be >= 1");
  if (!metric.ard_scales.empty()) {
    if (static_cast<int>(metric.ard_scales.size()) != dim)
      throw InputError("bind_kernel: ARD scale count does not match dimension");
    for (double s : metric.ard_scales)
      if (!(s > 0.0))
        throw InputError("bind_kernel: ARD scales must be positive");
  }
  Binder binder{space, dim, metric};
  BoundKernel k;
  k.root_ = binder.bind(spec);
  k.space_ = &space;
  k.dim_ = dim;
  k.n_caches_ = binder.next_cache_id;
  k.metric_ = std::move(metric);
  k.root_->collect_amplitude_slots(k.bump_amplitude_slots_);
  std::sort(k.bump_amplitude_slots_.begin(), k.bump_amplitude_slots_.end());
  k.bump_amplitude_slots_.erase(std::unique(k.bump_amplitude_slots_.begin(),
                                            k.bump_amplitude_slots_.end()),
                                k.bump_amplitude_slots_.end());
  return k;
}

double BoundKernel::eval(const EvalContext& ctx, PointRef a, PointRef b) const {
  return root_->eval(ctx.theta_.data(), ctx.caches_, a, b);
}

void BoundKernel::validate_theta(const Theta& theta) const {
  if (theta.size() != space_->size())
    throw HyperparameterError("theta size does not match parameter space");
  if (!space_->in_bounds(theta))
    throw HyperparameterError("theta out of declared bounds");
  root_->validate(theta.data());
}

EvalContext BoundKernel::make_context(const Theta& theta) const {
  return make_context(theta, PointSet{});
}

EvalContext BoundKernel::make_context(const Theta& theta,
                                      PointSet points) const {
  validate_theta(theta);
  EvalContext ctx;
  ctx.theta_ = theta;
  ctx.caches_.resize(static_cast<std::size_t>(n_caches_));
  root_->prepare(theta.data(), points, ctx.caches_);
  return ctx;
}

Eigen::MatrixXd gram_block(const BoundKernel& kernel, const EvalContext& ctx,
                           const std::vector<Point>& a,
                           const std::vector<Point>& b) {
  Eigen::MatrixXd out(a.size(), b.size());
  const bool same = &a == &b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    PointRef pi = ref(a[i]);
    for (std::size_t j = same ? i : 0; j < b.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          kernel.eval(ctx, pi, ref(b[j]));
    }
  }
  if (same)
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
  return out;
}

double eval_kernel(const KernelSpec& spec, const ParameterSpace& space,
                   const Theta& theta, const Point& a, const Point& b,
                   DistanceMetric metric) {
  const int dim = a.dim();
  BoundKernel k = bind_kernel(spec, space, dim, std::move(metric));
  EvalContext ctx = k.make_context(theta);
  return k.eval(ctx, ref(a), ref(b));
}

}  // namespace sgp
