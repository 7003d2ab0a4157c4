#pragma once

#include <vector>

#include "sgp/kernel.hpp"
#include "sgp/sparse.hpp"

namespace sgp {

// Half-open index range into the dataset.
struct BlockRange {
  Index start = 0;
  Index end = 0;

  Index size() const { return end - start; }
  friend bool operator==(const BlockRange&, const BlockRange&) = default;
};

// Contiguous ranges of length block_size (last possibly shorter) covering
// [0, n) in order.
std::vector<BlockRange> partition(Index n, Index block_size);

struct AssemblyPlan {
  Index block_size = 1000;
  int workers = 1;
  std::vector<BlockRange> blocks;
  std::vector<std::pair<int, int>> block_pairs;  // a <= b, upper triangle
};

AssemblyPlan make_plan(Index n, Index block_size, int workers);

struct AssemblyReport {
  Index n = 0;
  Index block_size = 0;
  int workers = 0;
  Index nnz = 0;
  double density = 0.0;
  double t_covariance_s = 0.0;
  double t_merge_s = 0.0;
  double t_csr_s = 0.0;
};

// Dense Gram for the block pair, sparsified at global offsets. Diagonal
// blocks (a == b) emit only col >= row; mirrors are synthesized at merge.
// Kernel errors propagate with the block identity attached.
TripletMatrix compute_block(const BoundKernel& kernel, const EvalContext& ctx,
                            PointSet points, BlockRange a, BlockRange b);

// Assembles K + diag(noise) in CSR form. The result is a pure function of
// (kernel, ctx, points, noise, block_size) -- identical bytes for any worker
// count and any completion order. The diagonal is stored for every row.
std::pair<CompressedRowMatrix, AssemblyReport> assemble(
    const BoundKernel& kernel, const EvalContext& ctx, PointSet points,
    const Eigen::VectorXd& noise, const AssemblyPlan& plan);

}  // namespace sgp
