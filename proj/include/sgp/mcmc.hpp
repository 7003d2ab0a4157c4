#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sgp/gp.hpp"
#include "sgp/parameters.hpp"
#include "sgp/rng.hpp"

namespace sgp {

struct McmcBlock {
  std::string name;
  std::vector<int> slots;       // indices into the parameter space
  double initial_scale = 0.0;   // 0 = derived from slot ranges
};

struct McmcConfig {
  Index iterations = 1;  // block-update steps; each one is a fresh evaluation
  std::uint64_t seed = 0;
  std::vector<McmcBlock> blocks;
  Index adapt_window = 50;
  double target_acceptance = 0.30;
  double burn_in_fraction = 0.30;
};

// One log-posterior evaluation: -inf (invalid) folds solver failures in.
struct LogPostEval {
  double value = -std::numeric_limits<double>::infinity();
  bool valid = false;
  std::string failure;
  GpTimings timings;
};

using LogPostFn = std::function<LogPostEval(const Theta&)>;

struct ChainState {
  Theta theta;
  double log_posterior = 0.0;
};

struct TraceRecord {
  Index iteration = 0;
  int block = 0;
  Eigen::VectorXd proposed_slice;
  bool accepted = false;
  double log_posterior = 0.0;  // of the state after the step
  GpTimings timings;
};

// Gaussian random-walk proposal touching only the block's components.
// Out-of-bounds candidates are kept; the bounded uniform prior rejects them.
Theta propose_block(const Theta& current, const McmcBlock& block, double scale,
                    Rng& rng);

// One Metropolis-Hastings block update. Requires state.log_posterior finite.
std::pair<ChainState, TraceRecord> mh_step(const ChainState& state,
                                           const McmcBlock& block, int block_id,
                                           double scale,
                                           const LogPostFn& log_posterior,
                                           Rng& rng, Index iteration);

// Multiplicative scale update steering acceptance toward the target; the
// result is clipped to [1e-6, 1e3] x initial_scale.
double adapt_scale(double scale, double acceptance, double target,
                   double initial_scale);

// Bounded-uniform-prior log posterior over a GP model: -inf outside bounds,
// otherwise the exact LML (the uniform prior contributes a constant 0).
LogPostFn make_gp_log_posterior(const GpModel& model);
LogPostFn make_dense_gp_log_posterior(const DenseGpModel& model);

// Streams trace records as newline-delimited JSON plus a resume checkpoint.
class TraceWriter {
 public:
  TraceWriter(std::filesystem::path trace_path,
              std::filesystem::path checkpoint_path,
              std::vector<std::string> block_names, bool append = false);

  void record(const TraceRecord& rec);
  void checkpoint(const std::string& checkpoint_json);
  const std::filesystem::path& trace_path() const { return trace_path_; }

 private:
  std::filesystem::path trace_path_;
  std::filesystem::path checkpoint_path_;
  std::vector<std::string> block_names_;
  std::ofstream out_;
};

// Serializable mid-run state; together with the trace it makes runs
// resumable.
struct ChainCheckpoint {
  Index next_iteration = 0;
  Theta theta;
  double log_posterior = 0.0;
  Theta best_theta;
  double best_log_posterior = 0.0;
  std::vector<double> scales;
  std::vector<Index> window_proposals;
  std::vector<Index> window_accepts;
  Index accepted_total = 0;
  Index accepted_post_burn = 0;
  std::string rng_state;

  std::string to_json() const;
  static ChainCheckpoint from_json(const std::string& text);
};

struct ChainResult {
  std::vector<TraceRecord> trace;
  Eigen::MatrixXd states;  // one row per step: theta after the step
  Theta initial_theta;
  Theta map_theta;
  double map_log_posterior = 0.0;
  std::vector<double> final_scales;
  std::vector<double> block_acceptance;  // post burn-in, per block
  Index accepted_total = 0;
  Index accepted_post_burn = 0;
  std::vector<std::string> failures;  // rejected evaluations with errors
};

// Block Metropolis-Hastings over the exact log posterior. Blocks cycle in
// declared order; each step performs exactly one fresh evaluation of the
// candidate. Adaptation runs during burn-in only, so the post-burn-in chain
// is a fixed-kernel MH chain. The returned map_theta maximizes the log
// posterior over all visited states.
class BlockMhSampler {
 public:
  BlockMhSampler(McmcConfig config, const ParameterSpace& space,
                 LogPostFn log_posterior);

  // Initial theta: user init if given, otherwise bound midpoints with the
  // listed slots (bump amplitudes) forced to zero.
  ChainResult run(std::optional<Theta> init = std::nullopt,
                  const std::vector<int>& zero_init_slots = {},
                  TraceWriter* sink = nullptr) const;

  ChainResult resume(const ChainCheckpoint& checkpoint,
                     TraceWriter* sink = nullptr) const;

  Theta initial_theta(const std::optional<Theta>& init,
                      const std::vector<int>& zero_init_slots) const;

 private:
  ChainResult run_loop(ChainState state, Rng rng, Index first_iteration,
                       std::vector<double> scales,
                       std::vector<Index> window_proposals,
                       std::vector<Index> window_accepts, Theta best_theta,
                       double best_lp, Index accepted_total,
                       Index accepted_post_burn, TraceWriter* sink) const;

  McmcConfig config_;
  const ParameterSpace* space_;
  LogPostFn log_posterior_;
  std::vector<double> initial_scales_;
};

}  // namespace sgp
