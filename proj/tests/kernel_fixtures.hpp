#pragma once

#include <random>
#include <string>
#include <vector>

#include "sgp/kernel.hpp"

namespace sgp::testing {

// One kernel family with its hyperparameter space, used by the PSD property
// suite and the acceptance criteria. Families mirror the engine's built-in
// leaves and combinators: stationary Wendland, the convolution-form
// non-stationary Wendland, the bump far-field composite, the delta far-field
// product, and the local/far-field split kernel.
struct KernelFamily {
  std::string name;
  ParameterSpace space;
  KernelSpec spec;
  bool needs_dataset = false;
};

inline KernelFamily wendland_family() {
  KernelFamily f;
  f.name = "wendland";
  f.space.add({"r0", 0.05, 2.0});
  f.spec = KernelSpec{WendlandNode{ParamRef("r0"), WendlandForm::kDefault}};
  return f;
}

inline KernelFamily nonstat_family(int dim) {
  KernelFamily f;
  f.name = "nonstat_wendland";
  f.space.add({"log_sig", -1.0, 1.0});
  std::vector<std::string> sig_params{"log_sig"};
  std::vector<std::string> len_params;
  for (int k = 0; k < dim; ++k) {
    const std::string name = "log_len" + std::to_string(k);
    f.space.add({name, -6.0, -2.0});
    len_params.push_back(name);
  }
  for (int k = 0; k < dim; ++k) {
    const std::string name = "sig_w" + std::to_string(k);
    f.space.add({name, -2.0, 2.0});
    sig_params.push_back(name);
  }
  for (int k = 0; k < dim; ++k) {
    const std::string name = "len_w" + std::to_string(k);
    f.space.add({name, -2.0, 2.0});
    len_params.push_back(name);
  }
  f.space.add({"taper", 0.5, 3.0});
  NonstatWendlandNode node;
  node.signal_field = ParametricField{FieldKind::kAxisLinear, sig_params, {}};
  node.length_field = ParametricField{FieldKind::kAxisLinear, len_params, {}};
  node.support_radius = ParamRef("taper");
  f.spec = KernelSpec{std::move(node)};
  return f;
}

// Matern core times (bump far-field + Wendland): the composite with
// higher-order far-field interactions.
inline KernelFamily bump_composite_family(int dim, int groups = 2,
                                          int per_group = 2) {
  KernelFamily f;
  f.name = "bump_composite";
  f.space.add({"core_len", 0.05, 1.0});
  f.space.add({"core_sig", 0.3, 2.0});
  f.space.add({"r0", 0.1, 2.0});
  f.space.add({"bump_shape", 0.3, 3.0});
  f.space.add({"bump_radius", 0.1, 1.0});
  std::vector<std::string> amp_slots;
  for (int i = 0; i < groups * per_group; ++i) {
    const std::string name = "amp" + std::to_string(i);
    f.space.add({name, 0.0, 1.5});
    amp_slots.push_back(name);
  }
  KernelSpec farfield = make_bump_grid(
      groups, per_group, std::vector<double>(static_cast<std::size_t>(dim), 0.0),
      std::vector<double>(static_cast<std::size_t>(dim), 1.0), amp_slots,
      ParamRef("bump_shape"), ParamRef("bump_radius"));
  KernelSpec local{WendlandNode{ParamRef("r0"), WendlandForm::kDefault}};
  KernelSpec core{Matern32Node{ParamRef("core_len"), ParamRef("core_sig")}};
  f.spec = k_product({std::move(core),
                      k_sum({std::move(farfield), std::move(local)})});
  return f;
}

// Wendland times radius-rule deltas: the maximal-sparsity mask.
inline KernelFamily delta_family() {
  KernelFamily f;
  f.name = "delta_product";
  f.space.add({"r0", 0.1, 2.0});
  f.space.add({"delta_radius", 0.0, 0.5});
  DeltaFarfieldNode deltas;
  deltas.groups.radius_rule = true;
  deltas.groups.radius = ParamRef("delta_radius");
  f.spec = k_product({KernelSpec{WendlandNode{ParamRef("r0")}},
                      KernelSpec{std::move(deltas)}});
  f.needs_dataset = true;
  return f;
}

inline KernelFamily split_family(int dim, int groups = 1, int per_group = 2) {
  KernelFamily f;
  f.name = "split_farfield";
  f.space.add({"log_sig", -1.0, 1.0});
  std::vector<std::string> local_params, far_params;
  for (int k = 0; k < dim; ++k) {
    const std::string name = "log_loc" + std::to_string(k);
    f.space.add({name, -6.0, -2.0});
    local_params.push_back(name);
  }
  for (int k = 0; k < dim; ++k) {
    const std::string name = "loc_w" + std::to_string(k);
    f.space.add({name, -2.0, 2.0});
    local_params.push_back(name);
  }
  for (int k = 0; k < dim; ++k) {
    const std::string name = "log_far" + std::to_string(k);
    f.space.add({name, -4.0, 0.0});
    far_params.push_back(name);
  }
  for (int k = 0; k < dim; ++k) {
    const std::string name = "far_w" + std::to_string(k);
    f.space.add({name, -2.0, 2.0});
    far_params.push_back(name);
  }
  f.space.add({"taper", 0.5, 3.0});
  f.space.add({"matern_len", 0.5, 3.0});
  f.space.add({"bump_shape", 0.3, 3.0});
  f.space.add({"bump_radius", 0.1, 1.0});
  std::vector<std::string> amp_slots;
  for (int i = 0; i < groups * per_group; ++i) {
    const std::string name = "amp" + std::to_string(i);
    f.space.add({name, 0.0, 1.5});
    amp_slots.push_back(name);
  }
  KernelSpec grid = make_bump_grid(
      groups, per_group, std::vector<double>(static_cast<std::size_t>(dim), 0.0),
      std::vector<double>(static_cast<std::size_t>(dim), 1.0), amp_slots,
      ParamRef("bump_shape"), ParamRef("bump_radius"));

  SplitFarfieldNode node;
  node.signal_field = ParametricField{FieldKind::kConstant, {"log_sig"}, {}};
  node.local_length_field =
      ParametricField{FieldKind::kAxisLinear, local_params, {}};
  node.farfield_length_field =
      ParametricField{FieldKind::kAxisLinear, far_params, {}};
  node.support_radius = ParamRef("taper");
  node.matern_length = ParamRef("matern_len");
  node.groups = std::get<BumpFarfieldNode>(grid.node).groups;
  f.spec = KernelSpec{std::move(node)};
  return f;
}

inline std::vector<KernelFamily> psd_families(int dim) {
  std::vector<KernelFamily> out;
  out.push_back(wendland_family());
  out.push_back(nonstat_family(dim));
  out.push_back(bump_composite_family(dim));
  out.push_back(delta_family());
  out.push_back(split_family(dim));
  return out;
}

inline Theta sample_theta(const ParameterSpace& space, std::mt19937_64& rng) {
  Theta theta(space.size());
  for (int i = 0; i < space.size(); ++i) {
    std::uniform_real_distribution<double> u(space.slot(i).lo,
                                             space.slot(i).hi);
    theta[i] = u(rng);
  }
  return theta;
}

// Gram of a family over points that carry dataset indices 0..n-1.
inline Eigen::MatrixXd family_gram(const KernelFamily& family,
                                   const Theta& theta,
                                   const std::vector<Point>& points,
                                   DistanceMetric metric = {}) {
  const int dim = points.front().dim();
  BoundKernel bound = bind_kernel(family.spec, family.space, dim, metric);
  std::vector<double> flat;
  flat.reserve(points.size() * static_cast<std::size_t>(dim));
  for (const auto& p : points)
    flat.insert(flat.end(), p.coords.begin(), p.coords.end());
  PointSet ps{flat.data(), static_cast<Index>(points.size()), dim};
  EvalContext ctx = bound.make_context(theta, ps);
  return gram_block(bound, ctx, points, points);
}

}  // namespace sgp::testing
