#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trp/dataset.hpp"
#include "trp/rng.hpp"

namespace trp {

struct BenchConfig {
  std::vector<int> k_values = {2, 4, 8};
  int n_reps = 50;
  std::vector<std::string> methods = {"trp-gibbs", "trp-map", "trans-lasso",
                                      "target-lasso", "pooled-ols"};
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;

  // Generator shape (ignored when a fixed problem is supplied).
  int p = 10;
  int n_target = 50;
  std::pair<int, int> n_source_range = {80, 120};
  int s_sparsity = 4;
  double contamination = 0.5;

  // When set, every repetition reuses this problem and only the holdout
  // split varies; k_values is ignored.
  std::optional<TransferProblem> problem;

  int gibbs_iters = 2000;
  int gibbs_burnin = 500;
  int n_threads = 0;  // 0 = hardware concurrency
};

struct BenchResult {
  std::string method;
  int k = 0;
  int rep = 0;
  double mse = 0.0;
  double seconds = 0.0;
};

/// Runs the held-out-MSE benchmark. Repetitions execute concurrently with
/// per-repetition RNG streams derived from the master seed, so results are
/// deterministic regardless of thread count. A method failure is recorded
/// as an mse of NaN and the run continues.
std::vector<BenchResult> run_benchmark(const BenchConfig& config);

/// Deterministic seed of the (k, rep) repetition, exposed so external checks
/// can reconstruct any repetition's RNG streams.
std::uint64_t bench_task_seed(std::uint64_t master, int k, int rep);

struct SplitIndices {
  std::vector<Eigen::Index> test;
  std::vector<Eigen::Index> train;
};

/// Row split used by the benchmark: a uniform shuffle of 0..n-1 with the
/// first round(fraction * n) rows held out. The benchmark draws the shuffle
/// from Rng(bench_task_seed(master, k, rep), 100).
SplitIndices bench_split_rows(Eigen::Index n, double fraction, Rng& rng);

struct SimpsonDemoConfig {
  int n_seeds = 10;
  std::uint64_t seed = 0;
  int n_per_cluster = 60;
  double noise_sd = 1.0;
  int n_train = 10;  // target rows used for fitting; the rest are held out
  int gibbs_iters = 3000;
  int gibbs_burnin = 1000;
};

struct SimpsonDemoRow {
  std::string method;
  int seed_index = 0;
  double mse = 0.0;
};

/// Two-cluster demo: per seed, fits the Gibbs sampler, target-only OLS, and
/// a hierarchical-mean baseline (ridge toward the average of the source OLS
/// coefficients, per-coordinate precision from their empirical spread) on a
/// small slice of the target, scoring each on the remaining target rows.
std::vector<SimpsonDemoRow> run_simpson_demo(const SimpsonDemoConfig& config);

/// Per-method median MSE over seeds, in first-appearance method order.
std::vector<std::pair<std::string, double>> simpson_medians(
    const std::vector<SimpsonDemoRow>& rows);

/// Results table as CSV text with header method,K,rep,mse,seconds.
std::string bench_results_csv(const std::vector<BenchResult>& results);

void write_bench_csv(const std::string& path,
                     const std::vector<BenchResult>& results);

std::vector<BenchResult> read_bench_csv(const std::string& path);

}  // namespace trp
