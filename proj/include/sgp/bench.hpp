#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "sgp/checkpoint.hpp"
#include "sgp/kernel_json.hpp"
#include "sgp/mcmc.hpp"

namespace sgp {

// The 1-D oscillatory benchmark function on [0, 1].
double synth_f1(double x);

struct SyntheticData {
  Dataset data;               // x ~ U[0,1], y = f1(x) + noise
  Eigen::VectorXd truth;      // noise-free f1 at the sampled x
};

SyntheticData make_synthetic_dataset(Index n, double noise_std,
                                     std::uint64_t seed);

// Strict CSV reader: header "x0,...,x{d-1},y", finite values, row order
// preserved, indices 0..n-1. Errors carry line numbers.
Dataset load_csv(const std::filesystem::path& path, DistanceMetric metric = {});
void write_csv(const Dataset& data, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Experiment configuration (schema "sgp.experiment/1")
// ---------------------------------------------------------------------------

struct DataConfig {
  std::string source = "synthetic-f1";  // or "csv"
  Index n_train = 100;
  Index n_test = 50;
  double noise_std = 0.1;
  std::uint64_t seed = 1;
  Index grid_points = 400;
  std::string path;           // csv source
  double test_fraction = 0.2;  // csv split
  DistanceMetric metric;
};

struct TrainConfig {
  Index iterations = 200;
  std::uint64_t seed = 7;
  double burn_in_fraction = 0.30;
  double target_acceptance = 0.30;
  Index adapt_window = 50;
  // name -> slots (by name) -> initial scale (0 = derived)
  struct Block {
    std::string name;
    std::vector<std::string> slots;
    double scale = 0.0;
  };
  std::vector<Block> blocks;
  std::map<std::string, double> init;  // user initial values by slot name
};

struct BaseGpConfig {
  bool enabled = false;
  KernelDocument kernel;
  TrainConfig train;
  nlohmann::json noise;  // same shape as the main noise config
};

struct ExperimentConfig {
  DataConfig data;
  KernelDocument kernel;
  nlohmann::json noise;  // {"kind":"constant","slot":...,"lo":...,"hi":...}
  nlohmann::json mean;   // {"kind":"zero"} | {"kind":"constant",...}
  TrainConfig train;
  GpConfig gp;
  BaseGpConfig base_gp;
  std::string output_dir = "out";
  int repeats = 1;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Mean per-evaluation wall times across the chain, the desk-scale analogue of
// a per-iteration timing table row.
struct TimingRow {
  Index size = 0;
  double density = 0.0;
  double t_covariance_s = 0.0;
  double t_solve_s = 0.0;
  double t_logdet_s = 0.0;
  double t_total_s = 0.0;
  Index evaluations = 0;
};

nlohmann::json timing_row_to_json(const TimingRow& row);

struct RunArtifacts {
  nlohmann::json report;
  std::filesystem::path report_path;
  std::filesystem::path checkpoint_path;
  std::filesystem::path predictions_path;
  std::filesystem::path plotdata_path;  // empty when not applicable
  std::filesystem::path trace_path;
  TimingRow timing;
  double rmse = 0.0;
  double crps = 0.0;
};

// Full pipeline: split, train, fit, predict, score; writes the run report,
// prediction CSV and (1-D synthetic) plot-data CSV into output_dir. With
// repeats > 1, runs seed-offset repetitions and reports mean and std of the
// metrics. A failing stage writes a partial report naming the stage, then
// rethrows.
RunArtifacts run_experiment(const ExperimentConfig& config);

}  // namespace sgp
