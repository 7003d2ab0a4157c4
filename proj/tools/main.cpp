#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sgp/bench.hpp"
#include "sgp/metrics.hpp"
#include "sgp/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 2 input/config, 3 training failure, 4 stale
// checkpoint, 1 anything else.
constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitInput = 2;
constexpr int kExitTraining = 3;
constexpr int kExitStale = 4;

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw sgp::ConfigError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw sgp::ConfigError(path.string() + ": " + e.what());
  }
  return j;
}

// Applies a dotted-path override ("train.iterations=500") onto a json tree.
// The referenced key must already exist: overrides adjust a config, they do
// not invent new keys.
void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw sgp::ConfigError("override '" + assignment + "' is not key=value");
  const std::string dotted = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* node = &config;
  std::size_t start = 0;
  std::vector<std::string> keys;
  while (true) {
    const auto dot = dotted.find('.', start);
    keys.push_back(dotted.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object() || !node->contains(keys[i]))
      throw sgp::ConfigError("override references unknown key '" + dotted + "'");
    node = &(*node)[keys[i]];
  }
  if (!node->is_object() || !node->contains(keys.back()))
    throw sgp::ConfigError("override references unknown key '" + dotted + "'");

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // unquoted strings pass through
  }
  (*node)[keys.back()] = std::move(value);
}

struct CommonOptions {
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> repeats;
  std::optional<std::string> out_dir;
};

sgp::ExperimentConfig materialize_config(const fs::path& config_path,
                                         const CommonOptions& opts) {
  json j = load_json_file(config_path);
  for (const auto& o : opts.overrides) apply_override(j, o);
  sgp::ExperimentConfig config = sgp::experiment_from_json(j);
  if (opts.seed) {
    config.data.seed = *opts.seed;
    config.train.seed = *opts.seed;
  }
  if (opts.workers) config.gp.workers = *opts.workers;
  if (opts.repeats) config.repeats = *opts.repeats;
  if (opts.out_dir) config.output_dir = *opts.out_dir;
  return config;
}

int cmd_train(const fs::path& config_path, const CommonOptions& opts) {
  sgp::ExperimentConfig config = materialize_config(config_path, opts);
  config.repeats = 1;
  sgp::RunArtifacts artifacts = sgp::run_experiment(config);
  std::cout << "checkpoint: " << artifacts.checkpoint_path.string() << '\n';
  std::cout << "trace:      " << artifacts.trace_path.string() << '\n';
  std::cout << "report:     " << artifacts.report_path.string() << '\n';
  return kExitOk;
}

int cmd_predict(const fs::path& checkpoint_path, const fs::path& data_path,
                const fs::path& test_path, const fs::path& out_path,
                const std::string& variance_kind) {
  const sgp::Checkpoint ck = sgp::load_checkpoint(checkpoint_path);
  sgp::Dataset train = sgp::load_csv(data_path, ck.metric);
  if (sgp::dataset_fingerprint(train) != ck.dataset_fingerprint)
    throw sgp::StaleCheckpointError(
        "checkpoint was trained on different data than " + data_path.string());

  sgp::Dataset test_rows = sgp::load_csv(test_path, ck.metric);
  std::vector<sgp::Point> test;
  test.reserve(static_cast<std::size_t>(test_rows.n()));
  for (sgp::Index i = 0; i < test_rows.n(); ++i) {
    sgp::Point p = test_rows.point(i);
    p.index.reset();
    test.push_back(std::move(p));
  }

  sgp::GpModel model(ck.spec, ck.space, std::move(train), ck.noise, ck.mean);
  sgp::TrainedModel fitted = model.fit(ck.theta);
  const auto kind = variance_kind == "y" ? sgp::VarianceKind::kObserved
                                         : sgp::VarianceKind::kLatent;
  sgp::PosteriorGaussian pred = model.predict(fitted, test, kind);

  std::ofstream out(out_path);
  if (!out) throw sgp::InputError("cannot write " + out_path.string());
  out.precision(17);
  out << "index,mean,variance,variance_kind\n";
  const char* kind_name = kind == sgp::VarianceKind::kObserved ? "y" : "f";
  for (sgp::Index i = 0; i < pred.mean.size(); ++i)
    out << i << ',' << pred.mean[i] << ',' << pred.variance[i] << ','
        << kind_name << '\n';
  std::cout << "predictions: " << out_path.string() << " (" << pred.mean.size()
            << " rows)\n";
  return kExitOk;
}

int cmd_evaluate(const fs::path& pred_path, const fs::path& truth_path,
                 const fs::path& out_path) {
  // Prediction CSV: index,mean,variance,variance_kind.
  std::ifstream in(pred_path);
  if (!in) throw sgp::InputError("cannot open " + pred_path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("index,mean,variance", 0) != 0)
    throw sgp::InputError(pred_path.string() +
                          ": expected header index,mean,variance,variance_kind");
  std::vector<double> means, vars;
  sgp::Index line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string idx, mean, var;
    if (!std::getline(is, idx, ',') || !std::getline(is, mean, ',') ||
        !std::getline(is, var, ','))
      throw sgp::InputError(pred_path.string() + " line " +
                            std::to_string(line_no) + ": malformed row");
    means.push_back(std::stod(mean));
    vars.push_back(std::stod(var));
  }
  if (means.empty()) throw sgp::InputError(pred_path.string() + ": no rows");

  sgp::Dataset truth = sgp::load_csv(truth_path);
  if (truth.n() != static_cast<sgp::Index>(means.size()))
    throw sgp::InputError("evaluate: prediction and truth row counts differ (" +
                          std::to_string(means.size()) + " vs " +
                          std::to_string(truth.n()) + ")");

  std::vector<double> sigmas(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i)
    sigmas[i] = std::sqrt(std::max(0.0, vars[i]));
  std::vector<double> truths(truth.y().data(), truth.y().data() + truth.n());

  json metrics{{"rmse", sgp::rmse(means, truths)},
               {"crps", sgp::crps_gaussian(means, sigmas, truths)},
               {"n_test", truth.n()}};

  bool binary = true;
  for (double y : truths)
    if (y != 0.0 && y != 1.0) {
      binary = false;
      break;
    }
  bool in_unit = true;
  for (double m : means)
    if (m < 0.0 || m > 1.0) {
      in_unit = false;
      break;
    }
  if (binary && in_unit) {
    std::vector<int> outcomes(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i)
      outcomes[i] = truths[i] == 1.0 ? 1 : 0;
    metrics["brier"] = sgp::brier(means, outcomes);
  }

  std::cout << metrics.dump(2) << '\n';
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw sgp::InputError("cannot write " + out_path.string());
    out << metrics.dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_benchmark(const fs::path& config_path, const CommonOptions& opts,
                  const std::vector<sgp::Index>& sizes) {
  sgp::ExperimentConfig base = materialize_config(config_path, opts);
  if (sizes.empty()) {
    sgp::RunArtifacts artifacts = sgp::run_experiment(base);
    std::cout << "report: " << artifacts.report_path.string() << '\n';
    return kExitOk;
  }

  json rows = json::array();
  const fs::path out_root(base.output_dir);
  for (sgp::Index size : sizes) {
    sgp::ExperimentConfig config = base;
    config.data.n_train = size;
    config.output_dir =
        (out_root / ("n_" + std::to_string(size))).string();
    sgp::RunArtifacts artifacts = sgp::run_experiment(config);
    json row = sgp::timing_row_to_json(artifacts.timing);
    row["rmse"] = artifacts.rmse;
    row["crps"] = artifacts.crps;
    rows.push_back(std::move(row));
    std::cout << "n=" << size << " done: density="
              << artifacts.timing.density << ", t_covariance_s="
              << artifacts.timing.t_covariance_s << '\n';
  }
  json report{{"schema", "sgp.benchmark_report/1"},
              {"engine_version", sgp::kEngineVersion},
              {"rows", std::move(rows)}};
  fs::create_directories(out_root);
  const fs::path report_path = out_root / "benchmark_report.json";
  std::ofstream out(report_path);
  if (!out) throw sgp::InputError("cannot write " + report_path.string());
  out << report.dump(2) << '\n';
  std::cout << "report: " << report_path.string() << '\n';
  return kExitOk;
}

int cmd_inspect(const fs::path& checkpoint_path) {
  const sgp::Checkpoint ck = sgp::load_checkpoint(checkpoint_path);
  std::cout << "engine version:      " << ck.engine_version << '\n';
  std::cout << "dataset fingerprint: " << ck.dataset_fingerprint << '\n';
  std::cout << "dataset size:        " << ck.dataset_n << " x "
            << ck.dataset_dim << '\n';
  std::cout << "metric:              "
            << (ck.metric.norm == sgp::Norm::kL1 ? "l1" : "euclidean") << '\n';
  std::cout << "achieved density:    " << ck.assembly.density << " ("
            << ck.assembly.nnz << " nonzeros)\n";
  std::cout << "log posterior:       " << ck.log_posterior << '\n';
  std::cout << "kernel:\n" << sgp::describe_kernel(ck.spec);
  std::cout << "hyperparameters:\n";
  for (int i = 0; i < ck.space.size(); ++i) {
    const auto& slot = ck.space.slot(i);
    std::cout << "  " << slot.name << " = " << ck.theta[i] << "  in ["
              << slot.lo << ", " << slot.hi << "]\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact sparse Gaussian process regression engine"};
  app.set_version_flag("--version", sgp::kEngineVersion);
  app.require_subcommand(1);

  CommonOptions opts;
  std::string config_path, checkpoint_path, data_path, test_path;
  std::string pred_path, truth_path, out_path, variance_kind = "y";
  std::vector<sgp::Index> sizes;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--set", opts.overrides,
                    "Dotted-path config override key=value");
    cmd->add_option("--seed", opts.seed, "Override data and chain seeds");
    cmd->add_option("--workers", opts.workers, "Assembly worker threads");
    cmd->add_option("--out", opts.out_dir, "Output directory");
  };

  auto* train = app.add_subcommand("train", "Train a model from a config");
  train->add_option("--config", config_path, "Experiment config JSON")
      ->required();
  add_common(train);

  auto* predict =
      app.add_subcommand("predict", "Predict from a trained checkpoint");
  predict->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")
      ->required();
  predict->add_option("--data", data_path, "Training data CSV")->required();
  predict->add_option("--test", test_path, "Test inputs CSV")->required();
  predict->add_option("--output", out_path, "Prediction CSV path")
      ->default_val("predictions.csv");
  predict->add_option("--variance", variance_kind, "f (latent) or y (observed)")
      ->check(CLI::IsMember({"f", "y"}));

  auto* evaluate =
      app.add_subcommand("evaluate", "Score predictions against truths");
  evaluate->add_option("--pred", pred_path, "Prediction CSV")->required();
  evaluate->add_option("--truth", truth_path, "Truth CSV (x...,y)")->required();
  evaluate->add_option("--output", out_path, "Metrics JSON path");

  auto* benchmark =
      app.add_subcommand("benchmark", "Run the experiment benchmark");
  benchmark->add_option("--config", config_path, "Experiment config JSON")
      ->required();
  benchmark->add_option("--sizes", sizes, "Training-set size sweep");
  benchmark->add_option("--repeats", opts.repeats, "Independent repeats");
  add_common(benchmark);

  auto* inspect = app.add_subcommand("inspect", "Summarize a checkpoint");
  inspect->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, opts);
    if (predict->parsed())
      return cmd_predict(checkpoint_path, data_path, test_path, out_path,
                         variance_kind);
    if (evaluate->parsed()) return cmd_evaluate(pred_path, truth_path, out_path);
    if (benchmark->parsed()) return cmd_benchmark(config_path, opts, sizes);
    if (inspect->parsed()) return cmd_inspect(checkpoint_path);
  } catch (const sgp::StaleCheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStale;
  } catch (const sgp::TrainingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTraining;
  } catch (const sgp::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const sgp::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOk;
}
