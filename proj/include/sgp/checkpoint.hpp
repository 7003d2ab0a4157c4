#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "sgp/gp.hpp"

namespace sgp {

nlohmann::json noise_to_json(const NoiseModel& noise);
NoiseModel noise_from_json(const nlohmann::json& j);

nlohmann::json mean_to_json(const MeanFunction& mean);
MeanFunction mean_from_json(const nlohmann::json& j);

nlohmann::json metric_to_json(const DistanceMetric& metric);
DistanceMetric metric_from_json(const nlohmann::json& j);

// A trained model as persisted to disk: full slot table, kernel tree, noise
// and mean configuration, selected theta by name, the fingerprint of the
// training data, achieved density, and the engine version. The training data
// itself is referenced, not embedded.
struct Checkpoint {
  KernelSpec spec;
  ParameterSpace space;
  NoiseModel noise;
  MeanFunction mean;
  Theta theta;
  double log_posterior = 0.0;
  std::string dataset_fingerprint;
  Index dataset_n = 0;
  int dataset_dim = 0;
  DistanceMetric metric;
  AssemblyReport assembly;
  std::string engine_version;
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json assembly_report_to_json(const AssemblyReport& report);

}  // namespace sgp
