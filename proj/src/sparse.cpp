#include "sgp/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "sgp/errors.hpp"

namespace sgp {

void sparsify_block(const Eigen::MatrixXd& block, Index row_offset,
                    Index col_offset, std::vector<Triplet>& out,
                    double drop_tolerance, BlockPart part) {
  if (row_offset < 0 || col_offset < 0)
    throw InputError("sparsify_block: offsets must be nonnegative");
  const Index rows = block.rows();
  const Index cols = block.cols();
  for (Index i = 0; i < rows; ++i) {
    const Index j0 = (part == BlockPart::kUpperIncludingDiagonal) ? i : 0;
    for (Index j = j0; j < cols; ++j) {
      const double v = block(i, j);
      if (v != 0.0 && std::abs(v) > drop_tolerance)
        out.push_back({i + row_offset, j + col_offset, v});
    }
  }
}

TripletMatrix sparsify_block(const Eigen::MatrixXd& block, Index row_offset,
                             Index col_offset, double drop_tolerance) {
  TripletMatrix t;
  t.n = std::max(row_offset + block.rows(), col_offset + block.cols());
  sparsify_block(block, row_offset, col_offset, t.entries, drop_tolerance);
  return t;
}

CompressedRowMatrix to_csr(const TripletMatrix& t) {
  CompressedRowMatrix m;
  m.n = t.n;
  m.row_offsets.assign(static_cast<std::size_t>(t.n) + 1, 0);

  for (const Triplet& e : t.entries) {
    if (e.row < 0 || e.row >= t.n || e.col < 0 || e.col >= t.n)
      throw InputError("to_csr: coordinate out of range");
    ++m.row_offsets[static_cast<std::size_t>(e.row) + 1];
  }
  for (std::size_t i = 1; i < m.row_offsets.size(); ++i)
    m.row_offsets[i] += m.row_offsets[i - 1];

  const Index nnz = static_cast<Index>(t.entries.size());
  m.col_indices.resize(static_cast<std::size_t>(nnz));
  m.values.resize(static_cast<std::size_t>(nnz));
  std::vector<Index> cursor(m.row_offsets.begin(), m.row_offsets.end() - 1);
  for (const Triplet& e : t.entries) {
    const Index k = cursor[static_cast<std::size_t>(e.row)]++;
    m.col_indices[static_cast<std::size_t>(k)] = e.col;
    m.values[static_cast<std::size_t>(k)] = e.value;
  }

  // Sort each row by column and check for duplicates.
  std::vector<Index> perm;
  for (Index i = 0; i < t.n; ++i) {
    const Index lo = m.row_offsets[static_cast<std::size_t>(i)];
    const Index hi = m.row_offsets[static_cast<std::size_t>(i) + 1];
    if (hi - lo <= 1) continue;
    perm.resize(static_cast<std::size_t>(hi - lo));
    for (Index k = 0; k < hi - lo; ++k) perm[static_cast<std::size_t>(k)] = lo + k;
    std::sort(perm.begin(), perm.end(), [&](Index x, Index y) {
      return m.col_indices[static_cast<std::size_t>(x)] <
             m.col_indices[static_cast<std::size_t>(y)];
    });
    std::vector<Index> cols(static_cast<std::size_t>(hi - lo));
    std::vector<double> vals(static_cast<std::size_t>(hi - lo));
    for (Index k = 0; k < hi - lo; ++k) {
      cols[static_cast<std::size_t>(k)] =
          m.col_indices[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
      vals[static_cast<std::size_t>(k)] =
          m.values[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
    }
    for (Index k = 1; k < hi - lo; ++k)
      if (cols[static_cast<std::size_t>(k)] == cols[static_cast<std::size_t>(k - 1)])
        throw AssemblyError("to_csr: duplicate coordinate (" +
                            std::to_string(i) + ", " +
                            std::to_string(cols[static_cast<std::size_t>(k)]) +
                            ")");
    std::copy(cols.begin(), cols.end(),
              m.col_indices.begin() + static_cast<std::ptrdiff_t>(lo));
    std::copy(vals.begin(), vals.end(),
              m.values.begin() + static_cast<std::ptrdiff_t>(lo));
  }
  return m;
}

TripletMatrix to_triplets(const CompressedRowMatrix& m) {
  TripletMatrix t;
  t.n = m.n;
  t.entries.reserve(m.values.size());
  for (Index i = 0; i < m.n; ++i)
    for (Index k = m.row_offsets[static_cast<std::size_t>(i)];
         k < m.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
      t.entries.push_back({i, m.col_indices[static_cast<std::size_t>(k)],
                           m.values[static_cast<std::size_t>(k)]});
  return t;
}

Eigen::VectorXd spmv(const CompressedRowMatrix& a, const Eigen::VectorXd& x) {
  if (x.size() != a.n) throw InputError("spmv: vector length mismatch");
  Eigen::VectorXd y(a.n);
  for (Index i = 0; i < a.n; ++i) {
    double acc = 0.0;
    for (Index k = a.row_offsets[static_cast<std::size_t>(i)];
         k < a.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
      acc += a.values[static_cast<std::size_t>(k)] *
             x[a.col_indices[static_cast<std::size_t>(k)]];
    y[i] = acc;
  }
  return y;
}

void write_matrix_market(const CompressedRowMatrix& m, std::ostream& os) {
  Index lower = 0;
  for (Index i = 0; i < m.n; ++i)
    for (Index k = m.row_offsets[static_cast<std::size_t>(i)];
         k < m.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
      if (m.col_indices[static_cast<std::size_t>(k)] <= i) ++lower;

  os << "%%MatrixMarket matrix coordinate real symmetric\n";
  os << m.n << ' ' << m.n << ' ' << lower << '\n';
  os.precision(17);
  for (Index i = 0; i < m.n; ++i)
    for (Index k = m.row_offsets[static_cast<std::size_t>(i)];
         k < m.row_offsets[static_cast<std::size_t>(i) + 1]; ++k) {
      const Index j = m.col_indices[static_cast<std::size_t>(k)];
      if (j <= i)
        os << i + 1 << ' ' << j + 1 << ' '
           << m.values[static_cast<std::size_t>(k)] << '\n';
    }
}

}  // namespace sgp
