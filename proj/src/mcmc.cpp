#include "sgp/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace sgp {

Theta propose_block(const Theta& current, const McmcBlock& block, double scale,
                    Rng& rng) {
  Theta candidate = current;
  for (int slot : block.slots) candidate[slot] += scale * rng.gaussian();
  return candidate;
}

std::pair<ChainState, TraceRecord> mh_step(const ChainState& state,
                                           const McmcBlock& block, int block_id,
                                           double scale,
                                           const LogPostFn& log_posterior,
                                           Rng& rng, Index iteration) {
  if (!std::isfinite(state.log_posterior))
    throw TrainingError("mh_step: current state has non-finite log posterior");

  const Theta candidate = propose_block(state.theta, block, scale, rng);
  const LogPostEval eval = log_posterior(candidate);
  const double log_u = std::log(rng.uniform());
  const bool accept = log_u < eval.value - state.log_posterior;

  TraceRecord rec;
  rec.iteration = iteration;
  rec.block = block_id;
  rec.proposed_slice.resize(static_cast<Eigen::Index>(block.slots.size()));
  for (std::size_t i = 0; i < block.slots.size(); ++i)
    rec.proposed_slice[static_cast<Eigen::Index>(i)] =
        candidate[block.slots[i]];
  rec.accepted = accept;
  rec.timings = eval.timings;

  ChainState next = accept ? ChainState{candidate, eval.value} : state;
  rec.log_posterior = next.log_posterior;
  return {std::move(next), std::move(rec)};
}

double adapt_scale(double scale, double acceptance, double target,
                   double initial_scale) {
  double updated = scale * std::exp(0.5 * (acceptance - target));
  updated = std::clamp(updated, 1e-6 * initial_scale, 1e3 * initial_scale);
  return updated;
}

LogPostFn make_gp_log_posterior(const GpModel& model) {
  return [&model](const Theta& theta) {
    LogPostEval out;
    if (!model.space().in_bounds(theta)) {
      out.failure = "theta outside prior support";
      return out;
    }
    const LmlResult lml = model.log_marginal_likelihood(theta);
    out.timings = lml.timings;
    if (!lml.valid) {
      out.failure = lml.failure;
      return out;
    }
    out.value = lml.value;  // bounded uniform prior contributes 0
    out.valid = true;
    return out;
  };
}

LogPostFn make_dense_gp_log_posterior(const DenseGpModel& model) {
  return [&model](const Theta& theta) {
    LogPostEval out;
    if (!model.space().in_bounds(theta)) {
      out.failure = "theta outside prior support";
      return out;
    }
    const LmlResult lml = model.log_marginal_likelihood(theta);
    out.timings = lml.timings;
    if (!lml.valid) {
      out.failure = lml.failure;
      return out;
    }
    out.value = lml.value;
    out.valid = true;
    return out;
  };
}

TraceWriter::TraceWriter(std::filesystem::path trace_path,
                         std::filesystem::path checkpoint_path,
                         std::vector<std::string> block_names, bool append)
    : trace_path_(std::move(trace_path)),
      checkpoint_path_(std::move(checkpoint_path)),
      block_names_(std::move(block_names)) {
  out_.open(trace_path_, append ? std::ios::app : std::ios::trunc);
  if (!out_)
    throw InputError("trace writer: cannot open " + trace_path_.string());
  out_.precision(17);
}

void TraceWriter::record(const TraceRecord& rec) {
  nlohmann::json j;
  j["iteration"] = rec.iteration;
  j["block"] = block_names_.at(static_cast<std::size_t>(rec.block));
  j["accepted"] = rec.accepted;
  j["log_posterior"] = rec.log_posterior;
  std::vector<double> slice(rec.proposed_slice.data(),
                            rec.proposed_slice.data() +
                                rec.proposed_slice.size());
  j["proposed"] = slice;
  j["t_covariance_s"] = rec.timings.t_covariance_s;
  j["t_solve_s"] = rec.timings.t_solve_s;
  j["t_logdet_s"] = rec.timings.t_logdet_s;
  j["t_total_s"] = rec.timings.t_total_s;
  out_ << j.dump() << '\n';
  out_.flush();
}

void TraceWriter::checkpoint(const std::string& checkpoint_json) {
  std::ofstream ck(checkpoint_path_, std::ios::trunc);
  if (!ck)
    throw InputError("trace writer: cannot open " + checkpoint_path_.string());
  ck << checkpoint_json;
}

namespace {

nlohmann::json vector_to_json(const Theta& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Theta vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  Theta v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

}  // namespace

std::string ChainCheckpoint::to_json() const {
  nlohmann::json j;
  j["schema"] = "sgp.chain_checkpoint/1";
  j["next_iteration"] = next_iteration;
  j["theta"] = vector_to_json(theta);
  j["log_posterior"] = log_posterior;
  j["best_theta"] = vector_to_json(best_theta);
  j["best_log_posterior"] = best_log_posterior;
  j["scales"] = scales;
  j["window_proposals"] = window_proposals;
  j["window_accepts"] = window_accepts;
  j["accepted_total"] = accepted_total;
  j["accepted_post_burn"] = accepted_post_burn;
  j["rng_state"] = rng_state;
  return j.dump(2);
}

ChainCheckpoint ChainCheckpoint::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "sgp.chain_checkpoint/1")
    throw InputError("chain checkpoint: unknown schema");
  ChainCheckpoint c;
  c.next_iteration = j.at("next_iteration").get<Index>();
  c.theta = vector_from_json(j.at("theta"));
  c.log_posterior = j.at("log_posterior").get<double>();
  c.best_theta = vector_from_json(j.at("best_theta"));
  c.best_log_posterior = j.at("best_log_posterior").get<double>();
  c.scales = j.at("scales").get<std::vector<double>>();
  c.window_proposals = j.at("window_proposals").get<std::vector<Index>>();
  c.window_accepts = j.at("window_accepts").get<std::vector<Index>>();
  c.accepted_total = j.at("accepted_total").get<Index>();
  c.accepted_post_burn = j.at("accepted_post_burn").get<Index>();
  c.rng_state = j.at("rng_state").get<std::string>();
  return c;
}

BlockMhSampler::BlockMhSampler(McmcConfig config, const ParameterSpace& space,
                               LogPostFn log_posterior)
    : config_(std::move(config)),
      space_(&space),
      log_posterior_(std::move(log_posterior)) {
  if (config_.iterations < 1)
    throw ConfigError("mcmc: iterations must be >= 1");
  if (config_.blocks.empty()) throw ConfigError("mcmc: needs >= 1 block");
  if (!(config_.target_acceptance > 0.0 && config_.target_acceptance < 1.0))
    throw ConfigError("mcmc: target acceptance must be in (0, 1)");
  if (config_.burn_in_fraction < 0.0 || config_.burn_in_fraction > 1.0)
    throw ConfigError("mcmc: burn-in fraction must be in [0, 1]");
  if (config_.adapt_window < 1)
    throw ConfigError("mcmc: adaptation window must be >= 1");

  std::vector<bool> used(static_cast<std::size_t>(space.size()), false);
  for (const auto& block : config_.blocks) {
    if (block.slots.empty())
      throw ConfigError("mcmc: block '" + block.name + "' has no slots");
    for (int slot : block.slots) {
      if (slot < 0 || slot >= space.size())
        throw ConfigError("mcmc: block '" + block.name +
                          "' references an unknown slot");
      if (used[static_cast<std::size_t>(slot)])
        throw ConfigError("mcmc: slot '" + space.slot(slot).name +
                          "' appears in more than one block");
      used[static_cast<std::size_t>(slot)] = true;
    }
  }
  for (int i = 0; i < space.size(); ++i)
    if (!used[static_cast<std::size_t>(i)])
      throw ConfigError("mcmc: slot '" + space.slot(i).name +
                        "' belongs to no block");

  for (const auto& block : config_.blocks) {
    double scale = block.initial_scale;
    if (scale <= 0.0) {
      // Default: a twentieth of the mean slot range.
      double range = 0.0;
      for (int slot : block.slots)
        range += space.slot(slot).hi - space.slot(slot).lo;
      scale = range / static_cast<double>(block.slots.size()) / 20.0;
    }
    initial_scales_.push_back(scale);
  }
}

Theta BlockMhSampler::initial_theta(
    const std::optional<Theta>& init,
    const std::vector<int>& zero_init_slots) const {
  if (init) {
    if (init->size() != space_->size())
      throw ConfigError("mcmc: initial theta size mismatch");
    return *init;
  }
  Theta theta = space_->midpoint();
  for (int slot : zero_init_slots) {
    const auto& s = space_->slot(slot);
    theta[slot] = std::clamp(0.0, s.lo, s.hi);
  }
  return theta;
}

ChainResult BlockMhSampler::run(std::optional<Theta> init,
                                const std::vector<int>& zero_init_slots,
                                TraceWriter* sink) const {
  const Theta theta0 = initial_theta(init, zero_init_slots);
  const LogPostEval eval0 = log_posterior_(theta0);
  if (!eval0.valid)
    throw TrainingError("mcmc: initial state is not evaluable: " +
                        eval0.failure);
  ChainState state{theta0, eval0.value};
  const std::size_t nb = config_.blocks.size();
  return run_loop(state, Rng(config_.seed), 0, initial_scales_,
                  std::vector<Index>(nb, 0), std::vector<Index>(nb, 0), theta0,
                  eval0.value, 0, 0, sink);
}

ChainResult BlockMhSampler::resume(const ChainCheckpoint& checkpoint,
                                   TraceWriter* sink) const {
  if (checkpoint.scales.size() != config_.blocks.size())
    throw ConfigError("mcmc resume: block count mismatch");
  if (checkpoint.theta.size() != space_->size())
    throw ConfigError("mcmc resume: theta size mismatch");
  ChainState state{checkpoint.theta, checkpoint.log_posterior};
  return run_loop(state, Rng::deserialize(checkpoint.rng_state),
                  checkpoint.next_iteration, checkpoint.scales,
                  checkpoint.window_proposals, checkpoint.window_accepts,
                  checkpoint.best_theta, checkpoint.best_log_posterior,
                  checkpoint.accepted_total, checkpoint.accepted_post_burn,
                  sink);
}

ChainResult BlockMhSampler::run_loop(
    ChainState state, Rng rng, Index first_iteration,
    std::vector<double> scales, std::vector<Index> window_proposals,
    std::vector<Index> window_accepts, Theta best_theta, double best_lp,
    Index accepted_total, Index accepted_post_burn, TraceWriter* sink) const {
  const Index iterations = config_.iterations;
  const Index burn_in =
      static_cast<Index>(std::floor(static_cast<double>(iterations) *
                                    config_.burn_in_fraction));
  const int nb = static_cast<int>(config_.blocks.size());

  ChainResult result;
  result.initial_theta = state.theta;
  const Index steps = iterations - first_iteration;
  result.trace.reserve(static_cast<std::size_t>(steps));
  result.states.resize(steps, space_->size());

  std::vector<Index> post_burn_proposals(static_cast<std::size_t>(nb), 0);
  std::vector<Index> post_burn_accepts(static_cast<std::size_t>(nb), 0);

  auto make_checkpoint = [&](Index next_iteration) {
    ChainCheckpoint c;
    c.next_iteration = next_iteration;
    c.theta = state.theta;
    c.log_posterior = state.log_posterior;
    c.best_theta = best_theta;
    c.best_log_posterior = best_lp;
    c.scales = scales;
    c.window_proposals = window_proposals;
    c.window_accepts = window_accepts;
    c.accepted_total = accepted_total;
    c.accepted_post_burn = accepted_post_burn;
    c.rng_state = rng.serialize();
    return c;
  };

  for (Index iter = first_iteration; iter < iterations; ++iter) {
    const int b = static_cast<int>(iter % nb);
    const auto& block = config_.blocks[static_cast<std::size_t>(b)];

    const Theta candidate = propose_block(state.theta, block, scales[b], rng);
    LogPostEval eval = log_posterior_(candidate);
    if (!eval.valid && !eval.failure.empty() &&
        eval.failure != "theta outside prior support")
      result.failures.push_back("iteration " + std::to_string(iter) + ": " +
                                eval.failure);
    const double log_u = std::log(rng.uniform());
    const bool accept = log_u < eval.value - state.log_posterior;
    if (accept) {
      state.theta = candidate;
      state.log_posterior = eval.value;
      ++accepted_total;
      if (iter >= burn_in) {
        ++accepted_post_burn;
        ++post_burn_accepts[static_cast<std::size_t>(b)];
      }
      if (state.log_posterior > best_lp) {
        best_lp = state.log_posterior;
        best_theta = state.theta;
      }
    }
    if (iter >= burn_in) ++post_burn_proposals[static_cast<std::size_t>(b)];

    TraceRecord rec;
    rec.iteration = iter;
    rec.block = b;
    rec.proposed_slice.resize(static_cast<Eigen::Index>(block.slots.size()));
    for (std::size_t i = 0; i < block.slots.size(); ++i)
      rec.proposed_slice[static_cast<Eigen::Index>(i)] =
          candidate[block.slots[i]];
    rec.accepted = accept;
    rec.log_posterior = state.log_posterior;
    rec.timings = eval.timings;
    result.states.row(iter - first_iteration) = state.theta;
    if (sink) sink->record(rec);
    result.trace.push_back(std::move(rec));

    // Proposal-scale adaptation, burn-in only.
    if (iter < burn_in) {
      ++window_proposals[static_cast<std::size_t>(b)];
      if (accept) ++window_accepts[static_cast<std::size_t>(b)];
      if (window_proposals[static_cast<std::size_t>(b)] >=
          config_.adapt_window) {
        const double acc =
            static_cast<double>(window_accepts[static_cast<std::size_t>(b)]) /
            static_cast<double>(window_proposals[static_cast<std::size_t>(b)]);
        scales[b] = adapt_scale(scales[b], acc, config_.target_acceptance,
                                initial_scales_[static_cast<std::size_t>(b)]);
        window_proposals[static_cast<std::size_t>(b)] = 0;
        window_accepts[static_cast<std::size_t>(b)] = 0;
      }
    }

    if (sink && ((iter + 1) % nb == 0 || iter + 1 == iterations))
      sink->checkpoint(make_checkpoint(iter + 1).to_json());
  }

  result.map_theta = best_theta;
  result.map_log_posterior = best_lp;
  result.final_scales = scales;
  result.accepted_total = accepted_total;
  result.accepted_post_burn = accepted_post_burn;
  result.block_acceptance.resize(static_cast<std::size_t>(nb), 0.0);
  for (int b = 0; b < nb; ++b) {
    const auto props = post_burn_proposals[static_cast<std::size_t>(b)];
    if (props > 0)
      result.block_acceptance[static_cast<std::size_t>(b)] =
          static_cast<double>(post_burn_accepts[static_cast<std::size_t>(b)]) /
          static_cast<double>(props);
  }

  const Index post_burn_steps = iterations - std::max(first_iteration, burn_in);
  if (post_burn_steps > 0 && accepted_post_burn == 0) {
    std::ostringstream diag;
    diag << "mcmc: zero accepted states after burn-in (" << post_burn_steps
         << " steps); final scales:";
    for (int b = 0; b < nb; ++b)
      diag << ' ' << config_.blocks[static_cast<std::size_t>(b)].name << '='
           << scales[static_cast<std::size_t>(b)];
    throw TrainingError(diag.str());
  }
  return result;
}

}  // namespace sgp
