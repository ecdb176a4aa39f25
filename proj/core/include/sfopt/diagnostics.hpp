#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sfopt/core.hpp"

namespace sfopt {

/// One recorded point of a run. The first seven fields make up the CSV
/// row; theta and hpd_min_eig are kept in memory and in checkpoints only.
struct MetricRow {
  std::uint64_t t = 0;
  std::optional<double> grad_norm_sq;  // |grad J(theta(t))|^2, oracle envs
  std::optional<double> hess_err_sq;   // |H(t) - hess J(theta(t))|_F^2, Hessian runs
  std::optional<double> z_err_sq;      // |Z(t) - grad J(theta(t))|^2, oracle envs
  std::optional<double> avg_cost;      // frozen-parameter evaluation mean
  std::optional<double> J_exact;       // analytic J(theta(t))

  Vector theta;
  std::optional<double> hpd_min_eig;  // smallest eigenvalue of the stored H
};

enum class RunStatus { Completed, Interrupted, Failed };

std::string_view to_string(RunStatus status);

struct RunTrace {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;
  RunStatus status = RunStatus::Completed;
  std::string failure;
};

/// Metrics emitted in CSVs, in schema order after t and seed.
enum class Metric { GradNormSq, HessErrSq, ZErrSq, AvgCost, JExact };
inline constexpr Metric kAllMetrics[] = {Metric::GradNormSq, Metric::HessErrSq, Metric::ZErrSq,
                                         Metric::AvgCost, Metric::JExact};

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);
const std::optional<double>& metric_value(const MetricRow& row, Metric metric);
std::optional<double>& metric_value(MetricRow& row, Metric metric);

/// A scalar metric sampled at increasing t.
struct Series {
  std::vector<double> t;
  std::vector<double> value;

  std::size_t size() const { return t.size(); }
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::size_t points = 0;
};

/// Recording points: 0, horizon, round(ratio^k) for k = 0, 1, ..., and
/// multiples of eval_every when it is non-zero. Sorted, unique.
std::vector<std::uint64_t> recording_grid(std::uint64_t horizon, double ratio,
                                          std::uint64_t eval_every = 0);

/// Running time average (1 / (t - tau + 1)) sum_{m=tau..t} hess_err_sq(m)
/// at every recorded t >= tau. Between recorded points the most recent
/// recorded value is held, so a stride-1 trace gives the exact average.
/// Throws MissingMetric.
Series time_avg_hessian_mse(const RunTrace& trace, std::uint64_t tau);

/// Running minimum over t of the cross-seed mean of grad_norm_sq.
/// Throws GridMismatch when the traces were recorded on different grids.
Series running_min_grad(const std::vector<RunTrace>& traces);

/// Cross-seed mean of one metric (rows missing it are an error).
Series mean_series(const std::vector<RunTrace>& traces, Metric metric);

/// Least squares on (log t, log value) over the trailing `window_fraction`
/// of the points with t > 0. Needs at least 10 points; throws
/// NonPositiveValue if any value in the window is <= 0.
RateFit loglog_slope(const Series& series, double window_fraction = 0.5);

struct MetricAggregate {
  Metric metric;
  std::vector<double> mean;
  std::vector<double> se;  // sample sd / sqrt(n)
};

struct Aggregate {
  std::vector<std::uint64_t> t;
  std::size_t n_seeds = 0;
  std::vector<MetricAggregate> metrics;  // only metrics present in every row

  const MetricAggregate* find(Metric metric) const;
};

/// Pointwise mean and standard error across seeds. Needs >= 2 traces on a
/// common grid (GridMismatch otherwise).
Aggregate aggregate_seeds(const std::vector<RunTrace>& traces);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTraceCsvHeader =
    "t,seed,grad_norm_sq,hess_err_sq,z_err_sq,avg_cost,J_exact";

void write_trace_csv(std::ostream& out, const RunTrace& trace);
/// Reads a per-seed CSV written by write_trace_csv.
RunTrace read_trace_csv(std::istream& in);

/// Columns: t,n_seeds,<metric>_mean,<metric>_se for each aggregated metric.
void write_aggregate_csv(std::ostream& out, const Aggregate& aggregate);

}  // namespace sfopt
