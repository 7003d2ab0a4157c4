#include "sgp/bench.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sgp/metrics.hpp"
#include "sgp/version.hpp"

namespace sgp {

using nlohmann::json;

double synth_f1(double x) {
  const double dx = x - 0.4;
  return std::sin(5.0 * x) + std::cos(20.0 * x) +
         2.0 * dx * dx * std::cos(400.0 * x);
}

SyntheticData make_synthetic_dataset(Index n, double noise_std,
                                     std::uint64_t seed) {
  if (n < 1) throw InputError("make_synthetic_dataset: n must be >= 1");
  if (!(noise_std >= 0.0))
    throw InputError("make_synthetic_dataset: noise std must be >= 0");
  Rng rng(seed);
  Dataset::Matrix x(n, 1);
  for (Index i = 0; i < n; ++i) x(i, 0) = rng.uniform();
  Eigen::VectorXd truth(n);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) truth[i] = synth_f1(x(i, 0));
  for (Index i = 0; i < n; ++i) y[i] = truth[i] + noise_std * rng.gaussian();
  return SyntheticData{Dataset(std::move(x), std::move(y)), std::move(truth)};
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream is(line);
  while (std::getline(is, token, ',')) out.push_back(token);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& token, Index line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  while (ptr < end && (*ptr == ' ' || *ptr == '\t' || *ptr == '\r')) ++ptr;
  if (ec != std::errc{} || ptr != end)
    throw InputError("csv line " + std::to_string(line_no) +
                     ": malformed number '" + token + "'");
  if (!std::isfinite(value))
    throw InputError("csv line " + std::to_string(line_no) +
                     ": non-finite value");
  return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, DistanceMetric metric) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open csv file " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw InputError("csv " + path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  if (header.size() < 2 || header.back() != "y")
    throw InputError("csv " + path.string() +
                     ": header must be x0,...,x{d-1},y");
  const int dim = static_cast<int>(header.size()) - 1;
  for (int k = 0; k < dim; ++k)
    if (header[static_cast<std::size_t>(k)] != "x" + std::to_string(k))
      throw InputError("csv " + path.string() +
                       ": header must be x0,...,x{d-1},y");

  std::vector<double> xs;
  std::vector<double> ys;
  Index line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tokens = split_line(line);
    if (static_cast<int>(tokens.size()) != dim + 1)
      throw InputError("csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dim + 1) + " columns, got " +
                       std::to_string(tokens.size()));
    for (int k = 0; k < dim; ++k)
      xs.push_back(parse_double(tokens[static_cast<std::size_t>(k)], line_no));
    ys.push_back(parse_double(tokens.back(), line_no));
  }
  if (ys.empty()) throw InputError("csv " + path.string() + ": no data rows");

  const Index n = static_cast<Index>(ys.size());
  Dataset::Matrix x(n, dim);
  for (Index i = 0; i < n; ++i)
    for (int k = 0; k < dim; ++k)
      x(i, k) = xs[static_cast<std::size_t>(i * dim + k)];
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) y[i] = ys[static_cast<std::size_t>(i)];
  return Dataset(std::move(x), std::move(y), std::move(metric));
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write csv file " + path.string());
  out.precision(17);
  for (int k = 0; k < data.dim(); ++k) out << 'x' << k << ',';
  out << "y\n";
  for (Index i = 0; i < data.n(); ++i) {
    for (int k = 0; k < data.dim(); ++k) out << data.x()(i, k) << ',';
    out << data.y()[i] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

DistanceMetric metric_from_config(const json& j) {
  DistanceMetric m;
  if (j.contains("metric")) m = metric_from_json(j.at("metric"));
  return m;
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.iterations = j.value("iterations", t.iterations);
  t.seed = j.value("seed", t.seed);
  t.burn_in_fraction = j.value("burn_in_fraction", t.burn_in_fraction);
  t.target_acceptance = j.value("target_acceptance", t.target_acceptance);
  t.adapt_window = j.value("adapt_window", t.adapt_window);
  if (j.contains("blocks")) {
    for (const auto& jb : j.at("blocks")) {
      TrainConfig::Block block;
      block.name = jb.at("name").get<std::string>();
      block.slots = jb.at("slots").get<std::vector<std::string>>();
      block.scale = jb.value("scale", 0.0);
      t.blocks.push_back(std::move(block));
    }
  }
  if (j.contains("init"))
    t.init = j.at("init").get<std::map<std::string, double>>();
  return t;
}

json train_to_json(const TrainConfig& t) {
  json blocks = json::array();
  for (const auto& b : t.blocks)
    blocks.push_back(
        json{{"name", b.name}, {"slots", b.slots}, {"scale", b.scale}});
  json j{{"iterations", t.iterations},
         {"seed", t.seed},
         {"burn_in_fraction", t.burn_in_fraction},
         {"target_acceptance", t.target_acceptance},
         {"adapt_window", t.adapt_window},
         {"blocks", std::move(blocks)}};
  if (!t.init.empty()) j["init"] = t.init;
  return j;
}

GpConfig gp_from_json(const json& j) {
  GpConfig g;
  g.block_size = j.value("block_size", g.block_size);
  g.workers = j.value("workers", g.workers);
  g.solver.tolerance = j.value("minres_tolerance", g.solver.tolerance);
  g.solver.max_iterations =
      j.value("minres_max_iterations", g.solver.max_iterations);
  return g;
}

json gp_to_json(const GpConfig& g) {
  return json{{"block_size", g.block_size},
              {"workers", g.workers},
              {"minres_tolerance", g.solver.tolerance},
              {"minres_max_iterations", g.solver.max_iterations}};
}

KernelDocument kernel_from_config(const json& j,
                                  const std::filesystem::path& base_dir) {
  if (j.is_object() && j.contains("path")) {
    std::filesystem::path p = j.at("path").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return load_kernel_document(p);
  }
  return kernel_document_from_json(j);
}

}  // namespace

ExperimentConfig experiment_from_json(const json& j) {
  if (j.value("schema", "") != "sgp.experiment/1")
    throw ConfigError("experiment config: expected schema sgp.experiment/1");
  ExperimentConfig c;
  const auto& jd = j.at("data");
  c.data.source = jd.value("source", c.data.source);
  if (c.data.source != "synthetic-f1" && c.data.source != "csv")
    throw ConfigError("experiment config: unknown data source '" +
                      c.data.source + "'");
  c.data.n_train = jd.value("n_train", c.data.n_train);
  c.data.n_test = jd.value("n_test", c.data.n_test);
  c.data.noise_std = jd.value("noise_std", c.data.noise_std);
  c.data.seed = jd.value("seed", c.data.seed);
  c.data.grid_points = jd.value("grid_points", c.data.grid_points);
  c.data.path = jd.value("path", c.data.path);
  c.data.test_fraction = jd.value("test_fraction", c.data.test_fraction);
  c.data.metric = metric_from_config(jd);

  c.kernel = kernel_from_config(j.at("kernel"), ".");
  c.noise = j.value("noise", json{{"kind", "constant"},
                                  {"slot", "log_noise_var"},
                                  {"lo", -13.8},
                                  {"hi", -1.0}});
  c.mean = j.value("mean", json{{"kind", "zero"}});
  if (j.contains("train")) c.train = train_from_json(j.at("train"));
  if (j.contains("gp")) c.gp = gp_from_json(j.at("gp"));
  if (j.contains("base_gp")) {
    const auto& jb = j.at("base_gp");
    c.base_gp.enabled = jb.value("enabled", false);
    if (c.base_gp.enabled) {
      c.base_gp.kernel = kernel_from_config(jb.at("kernel"), ".");
      if (jb.contains("train"))
        c.base_gp.train = train_from_json(jb.at("train"));
      c.base_gp.noise = jb.value("noise", c.noise);
    }
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  c.repeats = j.value("repeats", 1);
  if (c.repeats < 1) throw ConfigError("experiment config: repeats must be >= 1");
  return c;
}

json experiment_to_json(const ExperimentConfig& c) {
  json jd{{"source", c.data.source},
          {"n_train", c.data.n_train},
          {"n_test", c.data.n_test},
          {"noise_std", c.data.noise_std},
          {"seed", c.data.seed},
          {"grid_points", c.data.grid_points},
          {"test_fraction", c.data.test_fraction},
          {"metric", metric_to_json(c.data.metric)}};
  if (!c.data.path.empty()) jd["path"] = c.data.path;
  json j{{"schema", "sgp.experiment/1"},
         {"data", std::move(jd)},
         {"kernel", kernel_document_to_json(c.kernel)},
         {"noise", c.noise},
         {"mean", c.mean},
         {"train", train_to_json(c.train)},
         {"gp", gp_to_json(c.gp)},
         {"output_dir", c.output_dir},
         {"repeats", c.repeats}};
  if (c.base_gp.enabled)
    j["base_gp"] = json{{"enabled", true},
                        {"kernel", kernel_document_to_json(c.base_gp.kernel)},
                        {"train", train_to_json(c.base_gp.train)},
                        {"noise", c.base_gp.noise}};
  return j;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

json timing_row_to_json(const TimingRow& row) {
  return json{{"size", row.size},
              {"density", row.density},
              {"t_covariance_s", row.t_covariance_s},
              {"t_solve_s", row.t_solve_s},
              {"t_logdet_s", row.t_logdet_s},
              {"t_total_s", row.t_total_s},
              {"evaluations", row.evaluations}};
}

// ---------------------------------------------------------------------------
// Experiment pipeline
// ---------------------------------------------------------------------------

namespace {

struct PreparedData {
  Dataset train;
  Dataset test;
  bool synthetic = false;
  Eigen::VectorXd grid_x;
  Eigen::VectorXd grid_truth;
};

PreparedData prepare_data(const DataConfig& config) {
  if (config.source == "synthetic-f1") {
    if (config.n_train < 1 || config.n_test < 1)
      throw ConfigError("experiment: n_train and n_test must be >= 1");
    SyntheticData all = make_synthetic_dataset(
        config.n_train + config.n_test, config.noise_std, config.seed);
    Dataset::Matrix xtr = all.data.x().topRows(config.n_train);
    Dataset::Matrix xte = all.data.x().bottomRows(config.n_test);
    Eigen::VectorXd ytr = all.data.y().head(config.n_train);
    Eigen::VectorXd yte = all.data.y().tail(config.n_test);
    PreparedData out{Dataset(std::move(xtr), std::move(ytr)),
                     Dataset(std::move(xte), std::move(yte)), true,
                     Eigen::VectorXd(), Eigen::VectorXd()};
    const Index g = std::max<Index>(config.grid_points, 2);
    out.grid_x.resize(g);
    out.grid_truth.resize(g);
    for (Index i = 0; i < g; ++i) {
      out.grid_x[i] = static_cast<double>(i) / static_cast<double>(g - 1);
      out.grid_truth[i] = synth_f1(out.grid_x[i]);
    }
    return out;
  }

  Dataset all = load_csv(config.path, config.metric);
  const Index n = all.n();
  Index n_test = static_cast<Index>(
      std::llround(config.test_fraction * static_cast<double>(n)));
  n_test = std::clamp<Index>(n_test, 1, n - 1);

  // Seeded shuffle, disjoint split covering all rows.
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(config.seed);
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.integer() %
                                       static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(j)]);
  }
  const Index n_train = n - n_test;
  Dataset::Matrix xtr(n_train, all.dim()), xte(n_test, all.dim());
  Eigen::VectorXd ytr(n_train), yte(n_test);
  for (Index i = 0; i < n_train; ++i) {
    xtr.row(i) = all.x().row(perm[static_cast<std::size_t>(i)]);
    ytr[i] = all.y()[perm[static_cast<std::size_t>(i)]];
  }
  for (Index i = 0; i < n_test; ++i) {
    xte.row(i) = all.x().row(perm[static_cast<std::size_t>(n_train + i)]);
    yte[i] = all.y()[perm[static_cast<std::size_t>(n_train + i)]];
  }
  return PreparedData{Dataset(std::move(xtr), std::move(ytr), config.metric),
                      Dataset(std::move(xte), std::move(yte), config.metric),
                      false, Eigen::VectorXd(), Eigen::VectorXd()};
}

// Registers noise/mean hyperparameter slots (with bounds from the config
// json) on top of the kernel document slots.
ParameterSpace build_space(const KernelDocument& kernel, const json& noise_json,
                           const json& mean_json, NoiseModel& noise_out,
                           MeanFunction& mean_out) {
  ParameterSpace space = kernel.space;
  noise_out = noise_from_json(noise_json);
  if (noise_out.kind == NoiseModel::Kind::kConstant) {
    if (!noise_json.contains("lo") || !noise_json.contains("hi"))
      throw ConfigError("noise config: constant kind needs lo/hi bounds");
    space.add({noise_out.slot, noise_json.at("lo").get<double>(),
               noise_json.at("hi").get<double>()});
  } else if (noise_out.kind == NoiseModel::Kind::kParametric) {
    if (!noise_json.contains("slots"))
      throw ConfigError("noise config: parametric kind needs a slots array");
    for (const auto& js : noise_json.at("slots"))
      space.add({js.at("name").get<std::string>(), js.at("lo").get<double>(),
                 js.at("hi").get<double>()});
  }
  mean_out = mean_from_json(mean_json);
  if (mean_out.kind == MeanFunction::Kind::kConstant) {
    if (!mean_json.contains("lo") || !mean_json.contains("hi"))
      throw ConfigError("mean config: constant kind needs lo/hi bounds");
    space.add({mean_out.slot, mean_json.at("lo").get<double>(),
               mean_json.at("hi").get<double>()});
  }
  return space;
}

McmcConfig mcmc_config(const TrainConfig& train, const ParameterSpace& space) {
  McmcConfig m;
  m.iterations = train.iterations;
  m.seed = train.seed;
  m.adapt_window = train.adapt_window;
  m.target_acceptance = train.target_acceptance;
  m.burn_in_fraction = train.burn_in_fraction;
  if (train.blocks.empty()) {
    McmcBlock all;
    all.name = "all";
    for (int i = 0; i < space.size(); ++i) all.slots.push_back(i);
    m.blocks.push_back(std::move(all));
  } else {
    for (const auto& b : train.blocks) {
      McmcBlock block;
      block.name = b.name;
      for (const auto& name : b.slots)
        block.slots.push_back(space.require(name));
      block.initial_scale = b.scale;
      m.blocks.push_back(std::move(block));
    }
  }
  return m;
}

std::optional<Theta> user_init(const TrainConfig& train,
                               const ParameterSpace& space,
                               const std::vector<int>& bump_slots) {
  if (train.init.empty()) return std::nullopt;
  Theta theta(space.size());
  for (int i = 0; i < space.size(); ++i)
    theta[i] = 0.5 * (space.slot(i).lo + space.slot(i).hi);
  for (int slot : bump_slots) {
    const auto& s = space.slot(slot);
    theta[slot] = std::clamp(0.0, s.lo, s.hi);
  }
  for (const auto& [name, value] : train.init) theta[space.require(name)] = value;
  return theta;
}

json theta_to_named_json(const ParameterSpace& space, const Theta& theta) {
  json out = json::object();
  for (int i = 0; i < space.size(); ++i) out[space.slot(i).name] = theta[i];
  return out;
}

TimingRow aggregate_timing(const std::vector<TraceRecord>& trace, Index n,
                           double density) {
  TimingRow row;
  row.size = n;
  row.density = density;
  for (const auto& rec : trace) {
    row.t_covariance_s += rec.timings.t_covariance_s;
    row.t_solve_s += rec.timings.t_solve_s;
    row.t_logdet_s += rec.timings.t_logdet_s;
    row.t_total_s += rec.timings.t_total_s;
    ++row.evaluations;
  }
  if (row.evaluations > 0) {
    const double k = static_cast<double>(row.evaluations);
    row.t_covariance_s /= k;
    row.t_solve_s /= k;
    row.t_logdet_s /= k;
    row.t_total_s /= k;
  }
  return row;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const PosteriorGaussian& pred) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(17);
  out << "index,mean,variance,variance_kind\n";
  const char* kind = pred.kind == VarianceKind::kObserved ? "y" : "f";
  for (Index i = 0; i < pred.mean.size(); ++i)
    out << i << ',' << pred.mean[i] << ',' << pred.variance[i] << ',' << kind
        << '\n';
}

void write_plotdata_csv(const std::filesystem::path& path,
                        const Eigen::VectorXd& x, const PosteriorGaussian& pred,
                        const Eigen::VectorXd& truth) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(17);
  out << "x,mean,std,truth\n";
  for (Index i = 0; i < x.size(); ++i)
    out << x[i] << ',' << pred.mean[i] << ','
        << std::sqrt(std::max(0.0, pred.variance[i])) << ',' << truth[i]
        << '\n';
}

struct SingleRunResult {
  json report;
  TimingRow timing;
  double rmse_value = 0.0;
  double crps_value = 0.0;
  std::filesystem::path checkpoint_path;
  std::filesystem::path predictions_path;
  std::filesystem::path plotdata_path;
  std::filesystem::path trace_path;
};

SingleRunResult run_single(const ExperimentConfig& config,
                           const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  SingleRunResult result;
  json& report = result.report;
  report["schema"] = "sgp.run_report/1";
  report["engine_version"] = kEngineVersion;
  report["config"] = experiment_to_json(config);
  report["seeds"] = json{{"data", config.data.seed}, {"chain", config.train.seed}};
  if (config.data.source == "synthetic-f1")
    report["noise_std_used"] = config.data.noise_std;

  std::string stage = "data";
  try {
    // --- data ---
    PreparedData data = prepare_data(config.data);
    write_csv(data.train, out_dir / "train_data.csv");
    write_csv(data.test, out_dir / "test_data.csv");

    // --- model ---
    stage = "model";
    NoiseModel noise;
    MeanFunction mean;
    ParameterSpace space =
        build_space(config.kernel, config.noise, config.mean, noise, mean);
    GpModel model(config.kernel.spec, std::move(space), data.train, noise, mean,
                  config.gp);

    // --- train ---
    stage = "train";
    McmcConfig mcmc = mcmc_config(config.train, model.space());
    std::vector<std::string> block_names;
    for (const auto& b : mcmc.blocks) block_names.push_back(b.name);
    result.trace_path = out_dir / "trace.ndjson";
    TraceWriter sink(result.trace_path, out_dir / "chain_checkpoint.json",
                     block_names);
    BlockMhSampler sampler(mcmc, model.space(), make_gp_log_posterior(model));
    ChainResult chain =
        sampler.run(user_init(config.train, model.space(),
                              model.bump_amplitude_slots()),
                    model.bump_amplitude_slots(), &sink);

    json acceptance = json::object();
    for (std::size_t b = 0; b < mcmc.blocks.size(); ++b)
      acceptance[mcmc.blocks[b].name] = chain.block_acceptance[b];
    report["acceptance"] = json{{"blocks", std::move(acceptance)},
                                {"accepted_total", chain.accepted_total},
                                {"accepted_post_burn", chain.accepted_post_burn}};
    report["theta_selected"] =
        theta_to_named_json(model.space(), chain.map_theta);
    report["map_log_posterior"] = chain.map_log_posterior;

    // --- fit ---
    stage = "fit";
    TrainedModel fitted = model.fit(chain.map_theta);
    report["assembly"] = assembly_report_to_json(fitted.assembly);
    result.timing = aggregate_timing(chain.trace, data.train.n(),
                                     fitted.assembly.density);
    report["timing"] = timing_row_to_json(result.timing);

    Checkpoint ck;
    ck.spec = config.kernel.spec;
    ck.space = model.space();
    ck.noise = noise;
    ck.mean = mean;
    ck.theta = chain.map_theta;
    ck.log_posterior = chain.map_log_posterior;
    ck.dataset_fingerprint = dataset_fingerprint(data.train);
    ck.dataset_n = data.train.n();
    ck.dataset_dim = data.train.dim();
    ck.metric = data.train.metric();
    ck.assembly = fitted.assembly;
    ck.engine_version = kEngineVersion;
    result.checkpoint_path = out_dir / "checkpoint.json";
    save_checkpoint(ck, result.checkpoint_path);

    // --- predict ---
    stage = "predict";
    std::vector<Point> test_points;
    test_points.reserve(static_cast<std::size_t>(data.test.n()));
    for (Index i = 0; i < data.test.n(); ++i) {
      Point p = data.test.point(i);
      p.index.reset();  // prediction inputs carry no dataset identity
      test_points.push_back(std::move(p));
    }
    PosteriorGaussian pred =
        model.predict(fitted, test_points, VarianceKind::kObserved);
    if (!pred.failed_points.empty())
      throw EvaluationError("prediction failed for " +
                            std::to_string(pred.failed_points.size()) +
                            " test points");
    result.predictions_path = out_dir / "predictions.csv";
    write_predictions_csv(result.predictions_path, pred);

    json health{{"variance_clamps", pred.clamped},
                {"warnings", pred.warnings},
                {"training_failures", chain.failures}};

    if (data.synthetic && data.train.dim() == 1) {
      std::vector<Point> grid_points;
      grid_points.reserve(static_cast<std::size_t>(data.grid_x.size()));
      for (Index i = 0; i < data.grid_x.size(); ++i)
        grid_points.push_back(Point({data.grid_x[i]}));
      // The plot displays the latent-f posterior std.
      PosteriorGaussian grid_pred =
          model.predict(fitted, grid_points, VarianceKind::kLatent);
      result.plotdata_path = out_dir / "plotdata.csv";
      write_plotdata_csv(result.plotdata_path, data.grid_x, grid_pred,
                         data.grid_truth);
      health["grid_variance_clamps"] = grid_pred.clamped;
    }
    report["health"] = std::move(health);

    // --- score ---
    stage = "score";
    std::vector<double> sigmas(static_cast<std::size_t>(pred.mean.size()));
    for (Index i = 0; i < pred.mean.size(); ++i)
      sigmas[static_cast<std::size_t>(i)] =
          std::sqrt(std::max(0.0, pred.variance[i]));
    std::span<const double> means{pred.mean.data(),
                                  static_cast<std::size_t>(pred.mean.size())};
    std::span<const double> truths{
        data.test.y().data(), static_cast<std::size_t>(data.test.y().size())};
    result.rmse_value = rmse(means, truths);
    result.crps_value = crps_gaussian(means, sigmas, truths);
    json metrics{{"rmse", result.rmse_value},
                 {"crps", result.crps_value},
                 {"n_test", data.test.n()},
                 {"crps_variance", "y"}};
    // Brier applies when the target is a probability of a binary label.
    bool binary = true;
    for (Index i = 0; i < data.test.n() && binary; ++i)
      binary = data.test.y()[i] == 0.0 || data.test.y()[i] == 1.0;
    bool in_unit = true;
    for (Index i = 0; i < pred.mean.size() && in_unit; ++i)
      in_unit = pred.mean[i] >= 0.0 && pred.mean[i] <= 1.0;
    if (binary && in_unit) {
      std::vector<int> outcomes(static_cast<std::size_t>(data.test.n()));
      for (Index i = 0; i < data.test.n(); ++i)
        outcomes[static_cast<std::size_t>(i)] =
            data.test.y()[i] == 1.0 ? 1 : 0;
      metrics["brier"] = brier(means, outcomes);
    }
    report["metrics"] = std::move(metrics);

    // --- base GP comparison ---
    if (config.base_gp.enabled) {
      stage = "base_gp";
      NoiseModel base_noise;
      MeanFunction base_mean;
      ParameterSpace base_space =
          build_space(config.base_gp.kernel, config.base_gp.noise,
                      json{{"kind", "zero"}}, base_noise, base_mean);
      DenseGpModel base(config.base_gp.kernel.spec, std::move(base_space),
                        data.train, base_noise, base_mean);
      McmcConfig base_mcmc = mcmc_config(config.base_gp.train, base.space());
      BlockMhSampler base_sampler(base_mcmc, base.space(),
                                  make_dense_gp_log_posterior(base));
      ChainResult base_chain = base_sampler.run();
      DenseGpModel::Trained base_fit = base.fit(base_chain.map_theta);
      PosteriorGaussian base_pred =
          base.predict(base_fit, test_points, VarianceKind::kObserved);
      std::vector<double> base_sigmas(
          static_cast<std::size_t>(base_pred.mean.size()));
      for (Index i = 0; i < base_pred.mean.size(); ++i)
        base_sigmas[static_cast<std::size_t>(i)] =
            std::sqrt(std::max(0.0, base_pred.variance[i]));
      std::span<const double> base_means{
          base_pred.mean.data(), static_cast<std::size_t>(base_pred.mean.size())};
      report["base_gp"] =
          json{{"metrics",
                json{{"rmse", rmse(base_means, truths)},
                     {"crps", crps_gaussian(base_means, base_sigmas, truths)},
                     {"n_test", data.test.n()}}},
               {"theta_selected",
                theta_to_named_json(base.space(), base_chain.map_theta)},
               {"map_log_posterior", base_chain.map_log_posterior}};
    }

    report["status"] = "ok";
  } catch (...) {
    report["status"] = "failed";
    report["failed_stage"] = stage;
    try {
      throw;
    } catch (const std::exception& e) {
      report["error"] = e.what();
    } catch (...) {
      report["error"] = "unknown error";
    }
    std::ofstream out(out_dir / "run_report.json");
    if (out) out << report.dump(2) << '\n';
    throw;
  }

  std::ofstream out(out_dir / "run_report.json");
  if (!out)
    throw InputError("cannot write " + (out_dir / "run_report.json").string());
  out << report.dump(2) << '\n';
  return result;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& config) {
  const std::filesystem::path out_dir(config.output_dir);
  std::filesystem::create_directories(out_dir);

  if (config.repeats == 1) {
    SingleRunResult single = run_single(config, out_dir);
    RunArtifacts artifacts;
    artifacts.report = std::move(single.report);
    artifacts.report_path = out_dir / "run_report.json";
    artifacts.checkpoint_path = single.checkpoint_path;
    artifacts.predictions_path = single.predictions_path;
    artifacts.plotdata_path = single.plotdata_path;
    artifacts.trace_path = single.trace_path;
    artifacts.timing = single.timing;
    artifacts.rmse = single.rmse_value;
    artifacts.crps = single.crps_value;
    return artifacts;
  }

  // Ten-independent-runs protocol: seed offsets from the base seeds.
  std::vector<double> rmses, crpss;
  json repeat_reports = json::array();
  SingleRunResult last;
  for (int k = 0; k < config.repeats; ++k) {
    ExperimentConfig rep = config;
    rep.data.seed = config.data.seed + static_cast<std::uint64_t>(k);
    rep.train.seed = config.train.seed + static_cast<std::uint64_t>(k);
    rep.repeats = 1;
    last = run_single(rep, out_dir / ("repeat_" + std::to_string(k)));
    rmses.push_back(last.rmse_value);
    crpss.push_back(last.crps_value);
    repeat_reports.push_back(last.report);
  }

  RunArtifacts artifacts;
  artifacts.report = json{
      {"schema", "sgp.run_report/1"},
      {"engine_version", kEngineVersion},
      {"status", "ok"},
      {"config", experiment_to_json(config)},
      {"repeats", config.repeats},
      {"metrics", json{{"rmse_mean", mean_of(rmses)},
                       {"rmse_std", std_of(rmses)},
                       {"crps_mean", mean_of(crpss)},
                       {"crps_std", std_of(crpss)}}},
      {"runs", std::move(repeat_reports)}};
  artifacts.report_path = out_dir / "run_report.json";
  std::ofstream out(artifacts.report_path);
  if (!out) throw InputError("cannot write " + artifacts.report_path.string());
  out << artifacts.report.dump(2) << '\n';
  artifacts.checkpoint_path = last.checkpoint_path;
  artifacts.predictions_path = last.predictions_path;
  artifacts.plotdata_path = last.plotdata_path;
  artifacts.trace_path = last.trace_path;
  artifacts.timing = last.timing;
  artifacts.rmse = mean_of(rmses);
  artifacts.crps = mean_of(crpss);
  return artifacts;
}

}  // namespace sgp
