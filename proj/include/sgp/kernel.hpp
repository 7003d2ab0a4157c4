#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "sgp/fields.hpp"
#include "sgp/geometry.hpp"
#include "sgp/parameters.hpp"

namespace sgp {

// ---------------------------------------------------------------------------
// Primitive kernel functions
// ---------------------------------------------------------------------------

// The polynomial variant: the default uses the (35, 25, 8, 1) coefficients;
// kClassical switches the cubic coefficient to 32.
enum class WendlandForm { kDefault, kClassical };

/// Compactly supported Wendland kernel of the scaled distance d/r0.
/// Returns exactly 0 for d >= r0; value in [0, 1] with wendland(0, r0) == 1.
double wendland(double d, double r0, WendlandForm form = WendlandForm::kDefault);

/// Matern nu=3/2 kernel: sigma^2 (1 + sqrt(3) d / length) exp(-sqrt(3) d / length).
double matern32(double d, double length, double sigma);

// ---------------------------------------------------------------------------
// Far-field building blocks
// ---------------------------------------------------------------------------

struct BumpFunction {
  Point center;
  double amplitude = 0.0;  // >= 0
  double shape = 1.0;      // > 0
  double radius = 1.0;     // > 0
};

/// Smooth compactly supported bump: amplitude at the center, exactly 0 at and
/// beyond distance radius from the center.
double bump_eval(const BumpFunction& b, PointRef x,
                 const DistanceMetric& metric = {});

// A hyperparameter reference: either a named slot or a fixed constant.
struct ParamRef {
  std::string slot;    // non-empty = slot reference
  double fixed = 0.0;  // used when slot is empty

  ParamRef() = default;
  ParamRef(const char* name) : slot(name) {}
  ParamRef(std::string name) : slot(std::move(name)) {}
  ParamRef(double value) : fixed(value) {}
  bool is_slot() const { return !slot.empty(); }
};

struct BumpSpec {
  std::vector<ParamRef> center;  // one ref per coordinate
  ParamRef amplitude;
  ParamRef shape;
  ParamRef radius;
};

struct BumpGroupSpec {
  std::vector<BumpSpec> bumps;
};

// Delta groups: either explicit member-index sets, or the radius rule that
// derives one group per dataset point (members = points within `radius` of
// it, a flexible nearest-neighbor mask).
struct DeltaGroupsSpec {
  std::vector<std::vector<Index>> explicit_groups;
  bool radius_rule = false;
  ParamRef radius;
};

// ---------------------------------------------------------------------------
// Kernel specification tree
// ---------------------------------------------------------------------------

struct KernelSpec;

struct WendlandNode {
  ParamRef support_radius;
  WendlandForm form = WendlandForm::kDefault;
};

struct Matern32Node {
  ParamRef length;
  ParamRef sigma;
};

// Convolution-form non-stationary Wendland: spatially varying signal std and
// axis-aligned squared length scales, tapered at scaled distance
// sqrt(Q) >= support_radius.
struct NonstatWendlandNode {
  ParametricField signal_field;  // scalar role
  ParametricField length_field;  // diagonal role
  ParamRef support_radius;
  WendlandForm form = WendlandForm::kDefault;
};

// sum_u g_u(x_i) g_u(x_j) with g_u a sum of bump functions.
struct BumpFarfieldNode {
  std::vector<BumpGroupSpec> groups;
};

// sum_p g_p(x_i) g_p(x_j) with g_p an indicator sum over member indices.
struct DeltaFarfieldNode {
  DeltaGroupsSpec groups;
};

// Local + far-field split with shared signal field:
//   1/2 s(x_i) s(x_j) [ prefSigma k_W(sqrt(Q)) +
//                       prefPhi k_M(sqrt(P)) sum_u g_u(x_i) g_u(x_j) ]
// where Q uses the local length field and P the far-field length field.
struct SplitFarfieldNode {
  ParametricField signal_field;           // scalar role
  ParametricField local_length_field;     // diagonal role (Q)
  ParametricField farfield_length_field;  // diagonal role (P)
  ParamRef support_radius;                // Wendland taper on sqrt(Q)
  ParamRef matern_length;                 // Matern correlation length on sqrt(P)
  std::vector<BumpGroupSpec> groups;
  WendlandForm form = WendlandForm::kDefault;
};

struct ProductNode {
  std::vector<KernelSpec> children;
};

struct SumNode {
  std::vector<KernelSpec> children;
};

struct ScaleNode {
  ParamRef factor;                  // must evaluate > 0
  std::vector<KernelSpec> child;    // exactly one
};

struct KernelSpec {
  std::variant<WendlandNode, Matern32Node, NonstatWendlandNode,
               BumpFarfieldNode, DeltaFarfieldNode, SplitFarfieldNode,
               ProductNode, SumNode, ScaleNode>
      node;
};

// Convenience constructors for composite specs.
KernelSpec k_product(std::vector<KernelSpec> children);
KernelSpec k_sum(std::vector<KernelSpec> children);
KernelSpec k_scale(ParamRef factor, KernelSpec child);

// Uniform grid of U groups x P bumps over [lo, hi]^d with shared shape and
// radius refs. Amplitude slots must be pre-registered by the caller using
// `amplitude_slots[u][p]` naming; see make_bump_grid in kernel_json.cpp.
KernelSpec make_bump_grid(int groups, int bumps_per_group,
                          const std::vector<double>& lo,
                          const std::vector<double>& hi,
                          const std::vector<std::string>& amplitude_slots,
                          ParamRef shape, ParamRef radius);

// ---------------------------------------------------------------------------
// Bound (executable) kernels
// ---------------------------------------------------------------------------

class EvalNode;
namespace detail {
struct NodeCache;
}

// Per-evaluation immutable state: the hyperparameter vector plus caches that
// depend on (theta, dataset): per-point field values and delta-group
// memberships. Build once per theta, share across worker threads.
class EvalContext {
 public:
  const double* theta() const { return theta_.data(); }
  const Theta& theta_vector() const { return theta_; }

 private:
  friend class BoundKernel;
  Theta theta_;
  std::vector<std::shared_ptr<const detail::NodeCache>> caches_;
};

// A KernelSpec with every slot reference resolved, ready for evaluation.
// Immutable and safe for unrestricted concurrent use.
class BoundKernel {
 public:
  BoundKernel() = default;

  double eval(const EvalContext& ctx, PointRef a, PointRef b) const;

  // Context without dataset-dependent caches. Kernels using the delta radius
  // rule refuse to evaluate without a dataset.
  EvalContext make_context(const Theta& theta) const;
  // Context with per-point caches over the given points (index i of the set
  // is the dataset identity of point i).
  EvalContext make_context(const Theta& theta, PointSet points) const;

  // Validates bounds and structural positivity (support radii, lengths,
  // scale factors). Throws HyperparameterError.
  void validate_theta(const Theta& theta) const;

  // Slots acting as bump amplitudes (training starts with these at zero).
  const std::vector<int>& bump_amplitude_slots() const {
    return bump_amplitude_slots_;
  }

  int dim() const { return dim_; }
  const DistanceMetric& metric() const { return metric_; }

 private:
  friend BoundKernel bind_kernel(const KernelSpec&, const ParameterSpace&, int,
                                 DistanceMetric);
  std::shared_ptr<const EvalNode> root_;
  const ParameterSpace* space_ = nullptr;
  int dim_ = 0;
  int n_caches_ = 0;
  DistanceMetric metric_;
  std::vector<int> bump_amplitude_slots_;
};

BoundKernel bind_kernel(const KernelSpec& spec, const ParameterSpace& space,
                        int dim, DistanceMetric metric = {});

// Dense Gram block: entry (i, j) = k(A_i, B_j).
Eigen::MatrixXd gram_block(const BoundKernel& kernel, const EvalContext& ctx,
                           const std::vector<Point>& a,
                           const std::vector<Point>& b);

// One-call convenience used by tests and small tools: bind, build a context,
// evaluate a single pair. Throws HyperparameterError on out-of-bounds theta.
double eval_kernel(const KernelSpec& spec, const ParameterSpace& space,
                   const Theta& theta, const Point& a, const Point& b,
                   DistanceMetric metric = {});

}  // namespace sgp
