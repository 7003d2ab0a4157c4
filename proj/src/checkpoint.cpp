#include "sgp/checkpoint.hpp"

#include <fstream>

#include "sgp/kernel_json.hpp"
#include "sgp/version.hpp"

namespace sgp {

using nlohmann::json;

json noise_to_json(const NoiseModel& noise) {
  json j;
  switch (noise.kind) {
    case NoiseModel::Kind::kConstant:
      j["kind"] = "constant";
      j["slot"] = noise.slot;
      break;
    case NoiseModel::Kind::kPerPoint: {
      j["kind"] = "per_point";
      j["variances"] = std::vector<double>(
          noise.per_point.data(), noise.per_point.data() + noise.per_point.size());
      break;
    }
    case NoiseModel::Kind::kParametric:
      j["kind"] = "parametric";
      j["field"] = json{{"kind", noise.field.kind == FieldKind::kConstant
                                     ? "constant"
                                     : noise.field.kind == FieldKind::kAxisLinear
                                           ? "axis_linear"
                                           : "radial_expansion"},
                        {"params", noise.field.params}};
      if (!noise.field.center.empty())
        j["field"]["center"] = noise.field.center;
      break;
  }
  return j;
}

NoiseModel noise_from_json(const json& j) {
  NoiseModel noise;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    noise.kind = NoiseModel::Kind::kConstant;
    noise.slot = j.at("slot").get<std::string>();
  } else if (kind == "per_point") {
    noise.kind = NoiseModel::Kind::kPerPoint;
    const auto v = j.at("variances").get<std::vector<double>>();
    noise.per_point.resize(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
      noise.per_point[static_cast<Eigen::Index>(i)] = v[i];
  } else if (kind == "parametric") {
    noise.kind = NoiseModel::Kind::kParametric;
    const auto& jf = j.at("field");
    const auto fk = jf.at("kind").get<std::string>();
    noise.field.kind = fk == "constant" ? FieldKind::kConstant
                       : fk == "axis_linear" ? FieldKind::kAxisLinear
                                             : FieldKind::kRadialExpansion;
    noise.field.params = jf.at("params").get<std::vector<std::string>>();
    if (jf.contains("center"))
      noise.field.center = jf.at("center").get<std::vector<double>>();
  } else {
    throw ConfigError("noise: unknown kind '" + kind + "'");
  }
  return noise;
}

json mean_to_json(const MeanFunction& mean) {
  switch (mean.kind) {
    case MeanFunction::Kind::kZero:
      return json{{"kind", "zero"}};
    case MeanFunction::Kind::kConstant:
      return json{{"kind", "constant"}, {"slot", mean.slot}};
    case MeanFunction::Kind::kPlugIn:
      throw ConfigError("mean: plug-in means cannot be serialized");
  }
  return json{{"kind", "zero"}};
}

MeanFunction mean_from_json(const json& j) {
  MeanFunction mean;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "zero") {
    mean.kind = MeanFunction::Kind::kZero;
  } else if (kind == "constant") {
    mean.kind = MeanFunction::Kind::kConstant;
    mean.slot = j.at("slot").get<std::string>();
  } else {
    throw ConfigError("mean: unknown kind '" + kind + "'");
  }
  return mean;
}

json metric_to_json(const DistanceMetric& metric) {
  json j;
  j["norm"] = metric.norm == Norm::kL1 ? "l1" : "euclidean";
  if (!metric.ard_scales.empty()) j["ard_scales"] = metric.ard_scales;
  return j;
}

DistanceMetric metric_from_json(const json& j) {
  DistanceMetric metric;
  const auto norm = j.value("norm", "euclidean");
  if (norm == "l1")
    metric.norm = Norm::kL1;
  else if (norm == "euclidean")
    metric.norm = Norm::kEuclidean;
  else
    throw ConfigError("metric: unknown norm '" + norm + "'");
  if (j.contains("ard_scales"))
    metric.ard_scales = j.at("ard_scales").get<std::vector<double>>();
  return metric;
}

json assembly_report_to_json(const AssemblyReport& report) {
  return json{{"n", report.n},
              {"block_size", report.block_size},
              {"workers", report.workers},
              {"nnz", report.nnz},
              {"density", report.density},
              {"t_covariance_s", report.t_covariance_s},
              {"t_merge_s", report.t_merge_s},
              {"t_csr_s", report.t_csr_s}};
}

namespace {

AssemblyReport assembly_report_from_json(const json& j) {
  AssemblyReport r;
  r.n = j.value("n", Index{0});
  r.block_size = j.value("block_size", Index{0});
  r.workers = j.value("workers", 0);
  r.nnz = j.value("nnz", Index{0});
  r.density = j.value("density", 0.0);
  r.t_covariance_s = j.value("t_covariance_s", 0.0);
  r.t_merge_s = j.value("t_merge_s", 0.0);
  r.t_csr_s = j.value("t_csr_s", 0.0);
  return r;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& c) {
  json theta = json::object();
  for (int i = 0; i < c.space.size(); ++i)
    theta[c.space.slot(i).name] = c.theta[i];
  return json{{"schema", "sgp.checkpoint/1"},
              {"engine_version", c.engine_version.empty() ? kEngineVersion
                                                          : c.engine_version},
              {"slots", slots_to_json(c.space)},
              {"kernel", kernel_spec_to_json(c.spec)},
              {"noise", noise_to_json(c.noise)},
              {"mean", mean_to_json(c.mean)},
              {"theta", std::move(theta)},
              {"log_posterior", c.log_posterior},
              {"dataset",
               json{{"fingerprint", c.dataset_fingerprint},
                    {"n", c.dataset_n},
                    {"dim", c.dataset_dim},
                    {"metric", metric_to_json(c.metric)}}},
              {"assembly", assembly_report_to_json(c.assembly)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("schema", "") != "sgp.checkpoint/1")
    throw ConfigError("checkpoint: expected schema sgp.checkpoint/1");
  Checkpoint c;
  c.engine_version = j.value("engine_version", "");
  c.space = slots_from_json(j.at("slots"));
  c.spec = kernel_spec_from_json(j.at("kernel"));
  c.noise = noise_from_json(j.at("noise"));
  c.mean = mean_from_json(j.at("mean"));
  c.theta.resize(c.space.size());
  const auto& jt = j.at("theta");
  for (int i = 0; i < c.space.size(); ++i) {
    const auto& name = c.space.slot(i).name;
    if (!jt.contains(name))
      throw ConfigError("checkpoint: theta value missing for slot '" + name +
                        "'");
    c.theta[i] = jt.at(name).get<double>();
  }
  c.log_posterior = j.value("log_posterior", 0.0);
  const auto& jd = j.at("dataset");
  c.dataset_fingerprint = jd.at("fingerprint").get<std::string>();
  c.dataset_n = jd.value("n", Index{0});
  c.dataset_dim = jd.value("dim", 0);
  c.metric = metric_from_json(jd.at("metric"));
  c.assembly = assembly_report_from_json(j.at("assembly"));
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(c).dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace sgp
