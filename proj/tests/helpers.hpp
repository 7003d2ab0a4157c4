#pragma once

#include <random>
#include <vector>

#include <Eigen/Core>

#include "sgp/dataset.hpp"
#include "sgp/geometry.hpp"
#include "sgp/sparse.hpp"

namespace sgp::testing {

// Deterministic generators for test fixtures; std::mt19937_64 keeps expected
// values stable across runs on one platform.
inline std::vector<Point> random_points(std::mt19937_64& rng, Index n, int dim,
                                        double lo = 0.0, double hi = 1.0,
                                        bool with_indices = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    std::vector<double> coords(static_cast<std::size_t>(dim));
    for (auto& c : coords) c = u(rng);
    if (with_indices)
      pts.emplace_back(std::move(coords), i);
    else
      pts.emplace_back(std::move(coords));
  }
  return pts;
}

inline Dataset random_dataset(std::mt19937_64& rng, Index n, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset::Matrix x(n, dim);
  for (Index i = 0; i < n; ++i)
    for (int k = 0; k < dim; ++k) x(i, k) = u(rng);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) y[i] = g(rng);
  return Dataset(std::move(x), std::move(y));
}

// Random sparse SPD matrix: banded symmetric pattern made diagonally
// dominant.
inline CompressedRowMatrix random_sparse_spd(std::mt19937_64& rng, Index n,
                                             Index bandwidth = 6) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TripletMatrix t;
  t.n = n;
  Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < std::min(n, i + bandwidth); ++j) {
      const double v = u(rng);
      if (std::abs(v) < 0.3) continue;
      t.entries.push_back({i, j, v});
      t.entries.push_back({j, i, v});
      row_sum[i] += std::abs(v);
      row_sum[j] += std::abs(v);
    }
  std::uniform_real_distribution<double> d(0.1, 1.0);
  for (Index i = 0; i < n; ++i)
    t.entries.push_back({i, i, row_sum[i] + d(rng)});
  return to_csr(t);
}

inline Eigen::MatrixXd to_dense(const CompressedRowMatrix& m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.n, m.n);
  for (Index i = 0; i < m.n; ++i)
    for (Index k = m.row_offsets[static_cast<std::size_t>(i)];
         k < m.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
      out(i, m.col_indices[static_cast<std::size_t>(k)]) =
          m.values[static_cast<std::size_t>(k)];
  return out;
}

}  // namespace sgp::testing
