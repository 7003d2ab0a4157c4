#pragma once

#include <functional>

#include <Eigen/Core>

#include "sgp/sparse.hpp"

namespace sgp {

struct SolveReport {
  Index iterations = 0;
  double relative_residual = 0.0;  // recomputed as ||Ax - b|| / ||b||
  bool converged = false;
};

struct MinresOptions {
  double tolerance = 1e-8;  // relative residual target
  Index max_iterations = 0;  // 0 = 10 n
};

// MINRES for symmetric systems. Applies the operator through a callback so
// callers can wrap a CSR matrix or anything else symmetric. b = 0 returns
// x = 0 immediately. Non-convergence is reported, not thrown; the caller
// decides (the trainer rejects the proposal).
std::pair<Eigen::VectorXd, SolveReport> minres(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
    const Eigen::VectorXd& b, const MinresOptions& options = {});

std::pair<Eigen::VectorXd, SolveReport> minres(const CompressedRowMatrix& a,
                                               const Eigen::VectorXd& b,
                                               const MinresOptions& options = {});

enum class Ordering { kAmd, kNatural };

struct LogdetResult {
  double value = 0.0;
  // Any jitter added to the diagonal to rescue the factorization; 0 when the
  // matrix factored cleanly. Never applied silently.
  double jitter = 0.0;
  int attempts = 1;
};

// ln|A| via sparse Cholesky (LDL^T) over a fill-reducing permutation. On
// factorization breakdown, escalates diagonal jitter from 1e-10 to 1e-4 times
// the mean diagonal in x10 steps before giving up with DefinitenessError.
LogdetResult sparse_logdet(const CompressedRowMatrix& a,
                           Ordering ordering = Ordering::kAmd);

// Textbook dense Cholesky; the verification oracle for the sparse pipeline
// and the engine behind the dense reference GP. Guarded against accidental
// large-n use.
class DenseCholesky {
 public:
  static constexpr Index kMaxDense = 5000;

  explicit DenseCholesky(const Eigen::MatrixXd& a);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  double logdet() const;
  const Eigen::MatrixXd& factor() const { return l_; }

 private:
  Eigen::MatrixXd l_;
};

Eigen::VectorXd dense_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);
double dense_logdet(const Eigen::MatrixXd& a);

}  // namespace sgp
