#pragma once

#include <atomic>
#include <string>
#include <vector>

#include "sgp/assembly.hpp"
#include "sgp/dataset.hpp"
#include "sgp/kernel.hpp"
#include "sgp/solvers.hpp"

namespace sgp {

struct GpTimings {
  double t_covariance_s = 0.0;  // assembly: block compute + merge + csr
  double t_solve_s = 0.0;
  double t_logdet_s = 0.0;
  double t_total_s = 0.0;
};

// One exact log-marginal-likelihood evaluation. `valid` is false when the
// solver did not converge or the matrix was not positive definite; the
// trainer rejects such proposals.
struct LmlResult {
  double value = 0.0;
  bool valid = false;
  std::string failure;
  AssemblyReport assembly;
  SolveReport solve;
  LogdetResult logdet;
  GpTimings timings;
};

struct EvalCounters {
  long long assemblies = 0;
  long long solves = 0;
  long long logdets = 0;
};

struct GpConfig {
  Index block_size = 1000;
  int workers = 2;
  MinresOptions solver;
};

enum class VarianceKind { kLatent, kObserved };

struct TrainedModel {
  Theta theta;
  CompressedRowMatrix kv;      // K + V
  Eigen::VectorXd alpha;       // (K + V)^{-1} (y - m)
  AssemblyReport assembly;
  double log_marginal_likelihood = 0.0;
};

struct PosteriorGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  VarianceKind kind = VarianceKind::kLatent;
  Index clamped = 0;                 // negative variances clamped to zero
  std::vector<Index> failed_points;  // per-point solve failures, flagged
  std::vector<std::string> warnings;
};

// Exact GP through the sparse pipeline: block-assembled K+V, MINRES solves,
// sparse-Cholesky log-determinant. Immutable after construction; LML
// evaluations for different theta may run concurrently.
class GpModel {
 public:
  GpModel(KernelSpec spec, ParameterSpace space, Dataset data,
          NoiseModel noise, MeanFunction mean, GpConfig config = {});

  const ParameterSpace& space() const { return space_; }
  const Dataset& data() const { return data_; }
  const GpConfig& config() const { return config_; }
  const BoundKernel& kernel() const { return kernel_; }
  const std::vector<int>& bump_amplitude_slots() const {
    return kernel_.bump_amplitude_slots();
  }

  // -1/2 r^T (K+V)^{-1} r - 1/2 ln|K+V| - (n/2) ln(2 pi), r = y - m. The
  // normalization constant is included (full log-density).
  LmlResult log_marginal_likelihood(const Theta& theta) const;

  // Assembles and caches the solution vector for prediction reuse.
  TrainedModel fit(const Theta& theta) const;

  // Posterior mean/variance per test point via one MINRES solve each.
  // Test points with all-zero cross-covariance recover the prior exactly.
  PosteriorGaussian predict(const TrainedModel& model,
                            const std::vector<Point>& test,
                            VarianceKind kind = VarianceKind::kLatent) const;

  EvalCounters counters() const;
  void reset_counters() const;

 private:
  KernelSpec spec_;
  ParameterSpace space_;
  Dataset data_;
  NoiseModel noise_model_;
  MeanFunction mean_model_;
  GpConfig config_;
  BoundKernel kernel_;
  BoundNoise noise_;
  BoundMean mean_;
  AssemblyPlan plan_;
  mutable std::atomic<long long> n_assemblies_{0};
  mutable std::atomic<long long> n_solves_{0};
  mutable std::atomic<long long> n_logdets_{0};
};

// Dense reference GP: identical mathematical contract through dense Gram and
// textbook Cholesky. Verification oracle for the sparse pipeline and the
// "base GP" of the benchmark. Guarded to small n.
class DenseGpModel {
 public:
  DenseGpModel(KernelSpec spec, ParameterSpace space, Dataset data,
               NoiseModel noise, MeanFunction mean);

  const ParameterSpace& space() const { return space_; }
  const Dataset& data() const { return data_; }

  LmlResult log_marginal_likelihood(const Theta& theta) const;

  struct Trained {
    Theta theta;
    Eigen::MatrixXd kv;
    DenseCholesky factor;
    Eigen::VectorXd alpha;
    double log_marginal_likelihood = 0.0;
  };

  Trained fit(const Theta& theta) const;
  PosteriorGaussian predict(const Trained& model,
                            const std::vector<Point>& test,
                            VarianceKind kind = VarianceKind::kLatent) const;

 private:
  KernelSpec spec_;
  ParameterSpace space_;
  Dataset data_;
  NoiseModel noise_model_;
  MeanFunction mean_model_;
  BoundKernel kernel_;
  BoundNoise noise_;
  BoundMean mean_;

  Eigen::MatrixXd dense_kv(const EvalContext& ctx,
                           const Eigen::VectorXd& noise) const;
};

// One-call dense reference: fit at theta and predict at the test points.
PosteriorGaussian dense_reference_fit_predict(
    const Dataset& data, const KernelSpec& spec, const ParameterSpace& space,
    const Theta& theta, const NoiseModel& noise, const MeanFunction& mean,
    const std::vector<Point>& test, VarianceKind kind = VarianceKind::kLatent);

}  // namespace sgp
