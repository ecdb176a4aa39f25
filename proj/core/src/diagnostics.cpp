#include "sfopt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "sfopt/error.hpp"

namespace sfopt {

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Interrupted: return "interrupted";
    case RunStatus::Failed: return "failed";
  }
  return "unknown";
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::GradNormSq: return "grad_norm_sq";
    case Metric::HessErrSq: return "hess_err_sq";
    case Metric::ZErrSq: return "z_err_sq";
    case Metric::AvgCost: return "avg_cost";
    case Metric::JExact: return "J_exact";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics)
    if (to_string(m) == name) return m;
  throw Error(ErrorKind::ValidationError, fmt::format("unknown metric '{}'", name));
}

const std::optional<double>& metric_value(const MetricRow& row, Metric metric) {
  switch (metric) {
    case Metric::GradNormSq: return row.grad_norm_sq;
    case Metric::HessErrSq: return row.hess_err_sq;
    case Metric::ZErrSq: return row.z_err_sq;
    case Metric::AvgCost: return row.avg_cost;
    case Metric::JExact: return row.J_exact;
  }
  return row.grad_norm_sq;
}

std::optional<double>& metric_value(MetricRow& row, Metric metric) {
  return const_cast<std::optional<double>&>(
      metric_value(static_cast<const MetricRow&>(row), metric));
}

std::vector<std::uint64_t> recording_grid(std::uint64_t horizon, double ratio,
                                          std::uint64_t eval_every) {
  std::vector<std::uint64_t> grid{0, horizon};
  for (double x = 1.0; x <= static_cast<double>(horizon); x *= ratio) {
    grid.push_back(static_cast<std::uint64_t>(std::llround(x)));
  }
  if (eval_every > 0) {
    for (std::uint64_t t = eval_every; t <= horizon; t += eval_every) grid.push_back(t);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  while (!grid.empty() && grid.back() > horizon) grid.pop_back();
  return grid;
}

Series time_avg_hessian_mse(const RunTrace& trace, std::uint64_t tau) {
  Series out;
  double sum = 0.0;
  // Sample-and-hold: rows[i] stands for every m in [rows[i].t, rows[i+1].t).
  const auto& rows = trace.rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].hess_err_sq) {
      throw Error(ErrorKind::MissingMetric, fmt::format("hess_err_sq missing at t={}", rows[i].t));
    }
    const double v = *rows[i].hess_err_sq;
    if (rows[i].t >= tau) {
      // The span since the previous recorded point (clipped at tau) is held at
      // the previous value, then this point contributes itself.
      if (i > 0) {
        const std::uint64_t from = std::max(rows[i - 1].t + 1, tau);
        if (rows[i].t > from) {
          sum += *rows[i - 1].hess_err_sq * static_cast<double>(rows[i].t - from);
        }
      }
      sum += v;
      out.t.push_back(static_cast<double>(rows[i].t));
      out.value.push_back(sum / static_cast<double>(rows[i].t - tau + 1));
    }
  }
  return out;
}

namespace {

void check_common_grid(const std::vector<RunTrace>& traces) {
  if (traces.empty()) throw Error(ErrorKind::GridMismatch, "no traces");
  const auto& ref = traces.front().rows;
  for (const auto& trace : traces) {
    bool same = trace.rows.size() == ref.size();
    for (std::size_t i = 0; same && i < ref.size(); ++i) same = trace.rows[i].t == ref[i].t;
    if (!same) throw Error(ErrorKind::GridMismatch, "traces use different recording grids");
  }
}

}  // namespace

Series mean_series(const std::vector<RunTrace>& traces, Metric metric) {
  check_common_grid(traces);
  Series out;
  const auto& ref = traces.front().rows;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    double sum = 0.0;
    for (const auto& trace : traces) {
      const auto& v = metric_value(trace.rows[i], metric);
      if (!v) {
        throw Error(ErrorKind::MissingMetric,
                    fmt::format("{} missing at t={}", to_string(metric), ref[i].t));
      }
      sum += *v;
    }
    out.t.push_back(static_cast<double>(ref[i].t));
    out.value.push_back(sum / static_cast<double>(traces.size()));
  }
  return out;
}

Series running_min_grad(const std::vector<RunTrace>& traces) {
  Series out = mean_series(traces, Metric::GradNormSq);
  double best = std::numeric_limits<double>::infinity();
  for (double& v : out.value) {
    best = std::min(best, v);
    v = best;
  }
  return out;
}

RateFit loglog_slope(const Series& series, double window_fraction) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
    throw Error(ErrorKind::ValidationError, "window fraction must be in (0, 1]");
  }
  std::vector<std::size_t> positive_t;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series.t[i] > 0.0) positive_t.push_back(i);

  const auto n_window = static_cast<std::size_t>(
      std::ceil(window_fraction * static_cast<double>(positive_t.size())));
  if (n_window < 10) {
    throw Error(ErrorKind::ValidationError,
                fmt::format("slope fit needs at least 10 points, window has {}", n_window));
  }
  const std::size_t first = positive_t.size() - n_window;

  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = first; k < positive_t.size(); ++k) {
    const std::size_t i = positive_t[k];
    if (!(series.value[i] > 0.0)) {
      throw Error(ErrorKind::NonPositiveValue,
                  fmt::format("value {} at t={}", series.value[i], series.t[i]));
    }
    const double x = std::log(series.t[i]);
    const double y = std::log(series.value[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double n = static_cast<double>(n_window);
  const double cov = sxy - sx * sy / n;
  const double var_x = sxx - sx * sx / n;
  const double var_y = syy - sy * sy / n;

  RateFit fit;
  fit.slope = cov / var_x;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.r2 = var_y > 0.0 ? (cov * cov) / (var_x * var_y) : 1.0;
  fit.t_lo = series.t[positive_t[first]];
  fit.t_hi = series.t[positive_t.back()];
  fit.points = n_window;
  return fit;
}

const MetricAggregate* Aggregate::find(Metric metric) const {
  for (const auto& m : metrics)
    if (m.metric == metric) return &m;
  return nullptr;
}

Aggregate aggregate_seeds(const std::vector<RunTrace>& traces) {
  if (traces.size() < 2) {
    throw Error(ErrorKind::ValidationError, "aggregate_seeds needs at least two traces");
  }
  check_common_grid(traces);
  const auto& ref = traces.front().rows;
  const double n = static_cast<double>(traces.size());

  Aggregate out;
  out.n_seeds = traces.size();
  for (const auto& row : ref) out.t.push_back(row.t);

  for (Metric metric : kAllMetrics) {
    bool present = !ref.empty();
    for (const auto& trace : traces)
      for (const auto& row : trace.rows) present = present && metric_value(row, metric).has_value();
    if (!present) continue;

    MetricAggregate agg{metric, {}, {}};
    for (std::size_t i = 0; i < ref.size(); ++i) {
      double mean = 0.0;
      for (const auto& trace : traces) mean += *metric_value(trace.rows[i], metric);
      mean /= n;
      double ss = 0.0;
      for (const auto& trace : traces) {
        const double dev = *metric_value(trace.rows[i], metric) - mean;
        ss += dev * dev;
      }
      agg.mean.push_back(mean);
      agg.se.push_back(std::sqrt(ss / (n - 1.0)) / std::sqrt(n));
    }
    out.metrics.push_back(std::move(agg));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string csv_field(const std::optional<double>& v) { return v ? format_g17(*v) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << kTraceCsvHeader << '\n';
  for (const auto& row : trace.rows) {
    out << row.t << ',' << trace.seed;
    for (Metric m : kAllMetrics) out << ',' << csv_field(metric_value(row, m));
    out << '\n';
  }
}

RunTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader) {
    throw Error(ErrorKind::ParseError, "trace CSV: unexpected header");
  }
  RunTrace trace;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 7) {
      throw Error(ErrorKind::ParseError, fmt::format("trace CSV line {}: expected 7 fields", line_no));
    }
    MetricRow row;
    try {
      row.t = std::stoull(fields[0]);
      trace.seed = std::stoull(fields[1]);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::ParseError, fmt::format("trace CSV line {}: bad t/seed", line_no));
    }
    for (std::size_t k = 0; k < 5; ++k) {
      if (!fields[2 + k].empty()) metric_value(row, kAllMetrics[k]) = parse_double(fields[2 + k]);
    }
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

void write_aggregate_csv(std::ostream& out, const Aggregate& aggregate) {
  out << "t,n_seeds";
  for (const auto& m : aggregate.metrics) {
    out << ',' << to_string(m.metric) << "_mean," << to_string(m.metric) << "_se";
  }
  out << '\n';
  for (std::size_t i = 0; i < aggregate.t.size(); ++i) {
    out << aggregate.t[i] << ',' << aggregate.n_seeds;
    for (const auto& m : aggregate.metrics) {
      out << ',' << format_g17(m.mean[i]) << ',' << format_g17(m.se[i]);
    }
    out << '\n';
  }
}

}  // namespace sfopt
