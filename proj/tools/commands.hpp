#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sfopt/config.hpp"
#include "sfopt/diagnostics.hpp"
#include "sfopt/error.hpp"

namespace sfopt::cli {

enum ExitCode : int {
  kSuccess = 0,
  kValidationFailure = 1,
  kRuntimeFailure = 2,
  kPartialFailure = 3,
};

/// Maps a library error to the process exit code.
int exit_code_for(ErrorKind kind);

struct ExecutionOptions {
  std::uint64_t checkpoint_every = 0;
  bool resume = false;
  unsigned jobs = 0;  // 0 = hardware concurrency
};

/// Runs `config` once per seed (config.seed replaced). Workers own their
/// env, streams and trace; results come back in `seeds` order.
/// `checkpoint_dir` holds one checkpoint file per seed when checkpointing.
std::vector<RunTrace> run_seeds(const ExperimentConfig& config,
                                const std::vector<std::uint64_t>& seeds,
                                const ExecutionOptions& exec = {},
                                const std::optional<std::filesystem::path>& checkpoint_dir = {});

std::filesystem::path checkpoint_file(const std::filesystem::path& dir, std::uint64_t seed);

struct MetricSummary {
  Metric metric;
  std::optional<RateFit> fit;
  std::optional<double> initial;
  std::optional<double> final;
};

/// Slopes and end points per metric. grad_norm_sq is fitted on the
/// running minimum of the cross-seed mean; other metrics on the mean.
std::vector<MetricSummary> summarize(const std::vector<RunTrace>& traces,
                                     double window_fraction = 0.5);

nlohmann::json summary_json(const ExperimentConfig& config, const std::vector<RunTrace>& traces,
                            const std::vector<MetricSummary>& metrics);

struct RunReport {
  std::vector<RunTrace> traces;
  std::vector<MetricSummary> metrics;  // over successful seeds
  std::size_t failed = 0;
  int exit_code = kSuccess;
};

/// cmd_run: seed_<s>.csv per seed, aggregate.csv (two or more successful
/// seeds), summary.json and the resolved config.toml under `out_dir`.
RunReport cmd_run(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds,
                  const std::filesystem::path& out_dir, const ExecutionOptions& exec = {});

struct SweepCell {
  double sigma = 0.0;
  double alpha = 0.0;
  std::optional<double> nu;
};

struct SweepRow {
  SweepCell cell;
  std::size_t index = 0;
  bool skipped = false;
  std::string reason;
  std::optional<RateFit> fit;  // slope of the selection metric
  Metric selection = Metric::GradNormSq;
  bool best = false;
};

/// Cartesian product of the value lists (nu list empty for GSF1 runs).
std::vector<SweepCell> grid_cells(const std::vector<double>& sigmas,
                                  const std::vector<double>& alphas,
                                  const std::vector<double>& nus);

/// cmd_sweep: one sub-directory per valid cell (cell_<i>/), seeds offset by
/// the cell index, sweep.csv and sweep.json tables. Invalid orderings are
/// skipped; the best cell has the most negative selection slope
/// (running-min grad_norm_sq on oracle environments, avg_cost otherwise).
/// Throws EmptyGrid when no cell is given.
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& base, const std::vector<SweepCell>& cells,
                                const std::vector<std::uint64_t>& seeds,
                                const std::filesystem::path& out_dir,
                                const ExecutionOptions& exec = {});

struct CompareReport {
  RunReport a;
  RunReport b;
};

/// cmd_compare: runs both configs on the same seeds under out_dir/A and
/// out_dir/B and writes compare.csv (side-by-side means) and compare.json.
/// Throws EnvMismatch when the environment descriptors differ.
CompareReport cmd_compare(const ExperimentConfig& a, const ExperimentConfig& b,
                          const std::vector<std::uint64_t>& seeds,
                          const std::filesystem::path& out_dir, const ExecutionOptions& exec = {});

/// Fits a log-log slope to a metric read from per-seed trace CSVs.
RateFit cmd_slope(const std::vector<std::filesystem::path>& csv_files, Metric metric,
                  double window_fraction, bool running_min);

}  // namespace sfopt::cli
