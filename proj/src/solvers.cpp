#include "sgp/solvers.hpp"

#include <cmath>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "sgp/errors.hpp"

namespace sgp {

std::pair<Eigen::VectorXd, SolveReport> minres(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
    const Eigen::VectorXd& b, const MinresOptions& options) {
  const Index n = b.size();
  if (!(options.tolerance > 0.0))
    throw InputError("minres: tolerance must be positive");
  const Index maxit =
      options.max_iterations > 0 ? options.max_iterations : 10 * n;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  SolveReport report;
  const double norm_b = b.norm();
  if (norm_b == 0.0) {
    report.converged = true;
    return {x, report};
  }

  // Lanczos + QR update in the Paige-Saunders formulation.
  Eigen::VectorXd r1 = b;
  Eigen::VectorXd r2 = b;
  Eigen::VectorXd y = b;
  double beta1 = norm_b;
  double beta = beta1, oldb = 0.0;
  double dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0, oldeps = 0.0;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w2 = Eigen::VectorXd::Zero(n);

  Index itn = 0;
  while (itn < maxit) {
    ++itn;
    const double s = 1.0 / beta;
    Eigen::VectorXd v = s * y;
    y = apply(v);
    if (itn >= 2) y -= (beta / oldb) * r1;
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    oldb = beta;
    beta = std::sqrt(y.dot(y));

    oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;

    double gamma = std::hypot(gbar, beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    const Eigen::VectorXd w1 = w2;
    w2 = w;
    w = (v - oldeps * w1 - delta * w2) / gamma;
    x += phi * w;

    if (phibar / beta1 <= options.tolerance) break;
    if (beta <= 1e-300) break;  // exact Krylov breakdown: solution reached
  }

  report.iterations = itn;
  report.relative_residual = (apply(x) - b).norm() / norm_b;
  report.converged = report.relative_residual <= options.tolerance;
  return {x, report};
}

std::pair<Eigen::VectorXd, SolveReport> minres(const CompressedRowMatrix& a,
                                               const Eigen::VectorXd& b,
                                               const MinresOptions& options) {
  if (b.size() != a.n) throw InputError("minres: dimension mismatch");
  return minres([&a](const Eigen::VectorXd& v) { return spmv(a, v); }, b,
                options);
}

namespace {

Eigen::SparseMatrix<double> to_eigen(const CompressedRowMatrix& a,
                                     double jitter) {
  // The matrix is symmetric, so the CSR arrays of row j are the CSC arrays
  // of column j; fill column-by-column.
  Eigen::SparseMatrix<double> m(a.n, a.n);
  Eigen::VectorXi counts(a.n);
  for (Index j = 0; j < a.n; ++j)
    counts[j] = static_cast<int>(a.row_offsets[static_cast<std::size_t>(j) + 1] -
                                 a.row_offsets[static_cast<std::size_t>(j)]);
  m.reserve(counts);
  for (Index j = 0; j < a.n; ++j) {
    for (Index k = a.row_offsets[static_cast<std::size_t>(j)];
         k < a.row_offsets[static_cast<std::size_t>(j) + 1]; ++k) {
      const Index i = a.col_indices[static_cast<std::size_t>(k)];
      double v = a.values[static_cast<std::size_t>(k)];
      if (i == j) v += jitter;
      m.insert(i, j) = v;
    }
  }
  m.makeCompressed();
  return m;
}

template <typename Solver>
bool try_logdet(const Eigen::SparseMatrix<double>& m, double& out) {
  Solver solver;
  solver.compute(m);
  if (solver.info() != Eigen::Success) return false;
  const auto& d = solver.vectorD();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0) || !std::isfinite(d[i])) return false;
    acc += std::log(d[i]);
  }
  out = acc;
  return true;
}

}  // namespace

LogdetResult sparse_logdet(const CompressedRowMatrix& a, Ordering ordering) {
  if (a.n == 0) throw InputError("sparse_logdet: empty matrix");

  double mean_diag = 0.0;
  for (Index i = 0; i < a.n; ++i) {
    for (Index k = a.row_offsets[static_cast<std::size_t>(i)];
         k < a.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
      if (a.col_indices[static_cast<std::size_t>(k)] == i)
        mean_diag += a.values[static_cast<std::size_t>(k)];
  }
  mean_diag /= static_cast<double>(a.n);

  LogdetResult result;
  double jitter = 0.0;
  for (int attempt = 0;; ++attempt) {
    Eigen::SparseMatrix<double> m = to_eigen(a, jitter);
    double value = 0.0;
    bool ok =
        ordering == Ordering::kAmd
            ? try_logdet<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>,
                                               Eigen::Lower,
                                               Eigen::AMDOrdering<int>>>(m,
                                                                         value)
            : try_logdet<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>,
                                               Eigen::Lower,
                                               Eigen::NaturalOrdering<int>>>(
                  m, value);
    if (ok) {
      result.value = value;
      result.jitter = jitter;
      result.attempts = attempt + 1;
      return result;
    }
    // Escalate jitter: 1e-10 to 1e-4 of the mean diagonal in x10 steps.
    const double scale = std::abs(mean_diag) > 0.0 ? std::abs(mean_diag) : 1.0;
    jitter = (jitter == 0.0) ? 1e-10 * scale : jitter * 10.0;
    if (jitter > 1e-4 * scale)
      throw DefinitenessError(
          "sparse_logdet: matrix not positive definite even after jitter");
  }
}

DenseCholesky::DenseCholesky(const Eigen::MatrixXd& a) {
  const Index n = a.rows();
  if (n == 0) throw InputError("dense cholesky: empty matrix");
  if (a.cols() != n) throw InputError("dense cholesky: matrix must be square");
  if (n > kMaxDense)
    throw InputError("dense cholesky: n exceeds the dense-work guard");

  l_ = a;
  // Right-looking column Cholesky on the lower triangle.
  for (Index j = 0; j < n; ++j) {
    double d = l_(j, j);
    if (j > 0) d -= l_.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d))
      throw DefinitenessError("dense cholesky: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    l_(j, j) = ljj;
    if (j + 1 < n) {
      auto tail = l_.col(j).segment(j + 1, n - j - 1);
      if (j > 0)
        tail.noalias() -=
            l_.block(j + 1, 0, n - j - 1, j) * l_.row(j).head(j).transpose();
      tail /= ljj;
    }
  }
  l_.triangularView<Eigen::StrictlyUpper>().setZero();
}

Eigen::VectorXd DenseCholesky::solve(const Eigen::VectorXd& b) const {
  if (b.size() != l_.rows()) throw InputError("dense solve: length mismatch");
  Eigen::VectorXd y = l_.triangularView<Eigen::Lower>().solve(b);
  return l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double DenseCholesky::logdet() const {
  double acc = 0.0;
  for (Index i = 0; i < l_.rows(); ++i) acc += std::log(l_(i, i));
  return 2.0 * acc;
}

Eigen::VectorXd dense_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  return DenseCholesky(a).solve(b);
}

double dense_logdet(const Eigen::MatrixXd& a) {
  return DenseCholesky(a).logdet();
}

}  // namespace sgp
