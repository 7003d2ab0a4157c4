#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "sgp/geometry.hpp"

namespace sgp {

struct Triplet {
  Index row = 0;
  Index col = 0;
  double value = 0.0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

// Build/transport format. Entries hold only exact nonzeros; duplicates are
// forbidden once merged.
struct TripletMatrix {
  Index n = 0;
  std::vector<Triplet> entries;
};

// Solve format. Column indices are sorted within each row.
struct CompressedRowMatrix {
  Index n = 0;
  std::vector<Index> row_offsets;  // length n + 1
  std::vector<Index> col_indices;
  std::vector<double> values;

  Index nnz() const { return static_cast<Index>(values.size()); }

  friend bool operator==(const CompressedRowMatrix&,
                         const CompressedRowMatrix&) = default;
};

// Appends the exact nonzeros of a dense block at global offsets. Entries with
// |v| <= drop_tolerance are dropped; the default keeps everything but exact
// zeros, so sparsity comes only from the kernel.
enum class BlockPart { kFull, kUpperIncludingDiagonal };
void sparsify_block(const Eigen::MatrixXd& block, Index row_offset,
                    Index col_offset, std::vector<Triplet>& out,
                    double drop_tolerance = 0.0,
                    BlockPart part = BlockPart::kFull);

TripletMatrix sparsify_block(const Eigen::MatrixXd& block, Index row_offset,
                             Index col_offset, double drop_tolerance = 0.0);

// Lossless conversion; throws AssemblyError on duplicate coordinates (an
// overlapping-block bug upstream).
CompressedRowMatrix to_csr(const TripletMatrix& t);

// Row-major sorted triplets; round-trips with to_csr.
TripletMatrix to_triplets(const CompressedRowMatrix& m);

Eigen::VectorXd spmv(const CompressedRowMatrix& a, const Eigen::VectorXd& x);

// Matrix Market coordinate format for symmetric matrices: lower-triangle
// entries, 1-based indices.
void write_matrix_market(const CompressedRowMatrix& m, std::ostream& os);

}  // namespace sgp
