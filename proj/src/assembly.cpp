#include "sgp/assembly.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "sgp/errors.hpp"

namespace sgp {

namespace {
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace

std::vector<BlockRange> partition(Index n, Index block_size) {
  if (n < 1) throw InputError("partition: n must be >= 1");
  if (block_size < 1) throw InputError("partition: block size must be >= 1");
  std::vector<BlockRange> blocks;
  for (Index start = 0; start < n; start += block_size)
    blocks.push_back({start, std::min(start + block_size, n)});
  return blocks;
}

AssemblyPlan make_plan(Index n, Index block_size, int workers) {
  if (workers < 1) throw InputError("make_plan: worker count must be >= 1");
  AssemblyPlan plan;
  plan.block_size = block_size;
  plan.workers = workers;
  plan.blocks = partition(n, block_size);
  const int nb = static_cast<int>(plan.blocks.size());
  for (int a = 0; a < nb; ++a)
    for (int b = a; b < nb; ++b) plan.block_pairs.emplace_back(a, b);
  return plan;
}

TripletMatrix compute_block(const BoundKernel& kernel, const EvalContext& ctx,
                            PointSet points, BlockRange a, BlockRange b) {
  if (a.start > b.start)
    throw InputError("compute_block: requires a <= b in block order");
  TripletMatrix out;
  out.n = points.n;
  const bool diagonal = (a == b);

  Eigen::MatrixXd block(a.size(), b.size());
  try {
    for (Index i = a.start; i < a.end; ++i) {
      PointRef pi = points.point(i);
      const Index j0 = diagonal ? i : b.start;
      for (Index j = j0; j < b.end; ++j)
        block(i - a.start, j - b.start) = kernel.eval(ctx, pi, points.point(j));
    }
  } catch (const Error& e) {
    throw EvaluationError("block (" + std::to_string(a.start) + ":" +
                          std::to_string(a.end) + ", " +
                          std::to_string(b.start) + ":" + std::to_string(b.end) +
                          "): " + e.what());
  }
  sparsify_block(block, a.start, b.start, out.entries, 0.0,
                 diagonal ? BlockPart::kUpperIncludingDiagonal
                          : BlockPart::kFull);
  return out;
}

std::pair<CompressedRowMatrix, AssemblyReport> assemble(
    const BoundKernel& kernel, const EvalContext& ctx, PointSet points,
    const Eigen::VectorXd& noise, const AssemblyPlan& plan) {
  const Index n = points.n;
  if (noise.size() != n) throw InputError("assemble: noise length mismatch");
  for (Index i = 0; i < n; ++i)
    if (!(noise[i] >= 0.0))
      throw InputError("assemble: noise variances must be nonnegative");

  AssemblyReport report;
  report.n = n;
  report.block_size = plan.block_size;
  report.workers = plan.workers;

  // Phase 1: block covariance fragments, one work item per block pair.
  // Fragments land in a slot per item, so the merge below is independent of
  // scheduling. A failing item is retried once, then assembly aborts.
  const auto t0 = Clock::now();
  const std::size_t n_items = plan.block_pairs.size();
  std::vector<TripletMatrix> fragments(n_items);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex failure_mutex;
  std::string failure_message;

  auto work = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t item = next.fetch_add(1);
      if (item >= n_items) return;
      const auto [ia, ib] = plan.block_pairs[item];
      const BlockRange ba = plan.blocks[static_cast<std::size_t>(ia)];
      const BlockRange bb = plan.blocks[static_cast<std::size_t>(ib)];
      for (int attempt = 0;; ++attempt) {
        try {
          fragments[item] = compute_block(kernel, ctx, points, ba, bb);
          break;
        } catch (const std::exception& e) {
          if (attempt == 0) continue;  // retry the work item once
          std::lock_guard<std::mutex> lock(failure_mutex);
          failure_message = e.what();
          failed.store(true);
          return;
        }
      }
    }
  };

  if (plan.workers <= 1 || n_items <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    const int n_threads =
        std::min<int>(plan.workers, static_cast<int>(n_items));
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failed.load())
    throw AssemblyError("assembly aborted after retry: " + failure_message);
  report.t_covariance_s = seconds_since(t0);

  // Phase 2: deterministic merge in block-pair order. Mirrors off-diagonal
  // entries, captures kernel diagonal values, and adds the noise diagonal so
  // every row stores its diagonal entry.
  const auto t1 = Clock::now();
  TripletMatrix merged;
  merged.n = n;
  std::size_t total = 0;
  for (const auto& f : fragments) total += f.entries.size();
  merged.entries.reserve(2 * total + static_cast<std::size_t>(n));

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  std::vector<bool> diag_seen(static_cast<std::size_t>(n), false);
  for (const auto& fragment : fragments) {
    for (const Triplet& e : fragment.entries) {
      if (e.row == e.col) {
        if (diag_seen[static_cast<std::size_t>(e.row)])
          throw AssemblyError("assemble: duplicate diagonal entry at row " +
                              std::to_string(e.row));
        diag_seen[static_cast<std::size_t>(e.row)] = true;
        diag[e.row] = e.value;
      } else {
        merged.entries.push_back(e);
        merged.entries.push_back({e.col, e.row, e.value});
      }
    }
  }
  for (Index i = 0; i < n; ++i)
    merged.entries.push_back({i, i, diag[i] + noise[i]});
  report.t_merge_s = seconds_since(t1);

  const auto t2 = Clock::now();
  CompressedRowMatrix csr = to_csr(merged);
  report.t_csr_s = seconds_since(t2);

  report.nnz = csr.nnz();
  report.density =
      static_cast<double>(report.nnz) / (static_cast<double>(n) * n);
  return {std::move(csr), report};
}

}  // namespace sgp
