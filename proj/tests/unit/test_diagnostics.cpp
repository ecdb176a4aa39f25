#include <cmath>
#include <functional>
#include <sstream>

#include <gtest/gtest.h>

#include "sfopt/diagnostics.hpp"
#include "sfopt/error.hpp"

namespace sfopt {
namespace {

RunTrace trace_of(const std::vector<std::uint64_t>& t, const std::vector<double>& values,
                  Metric metric = Metric::GradNormSq) {
  RunTrace trace;
  for (std::size_t i = 0; i < t.size(); ++i) {
    MetricRow row;
    row.t = t[i];
    metric_value(row, metric) = values[i];
    trace.rows.push_back(row);
  }
  return trace;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::IoError;
}

Series power_law(double lo, double hi, double ratio, const std::function<double(double)>& f) {
  Series s;
  for (double t = lo; t <= hi * (1 + 1e-12); t *= ratio) {
    s.t.push_back(t);
    s.value.push_back(f(t));
  }
  return s;
}

TEST(RecordingGrid, ContainsEndsAndGeometricPoints) {
  const auto grid = recording_grid(100000, 1.15);
  EXPECT_EQ(grid.front(), 0u);
  EXPECT_EQ(grid.back(), 100000u);
  EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
  EXPECT_EQ(std::adjacent_find(grid.begin(), grid.end()), grid.end());
  // Consecutive large points grow by roughly the ratio.
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    if (grid[i] > 1000) {
      const double r = static_cast<double>(grid[i + 1]) / grid[i];
      if (grid[i + 1] != 100000u) EXPECT_NEAR(r, 1.15, 0.01);
    }
  }
  // Roughly log(1e5)/log(1.15) points plus the small-t duplicates removed.
  EXPECT_GT(grid.size(), 60u);
  EXPECT_LT(grid.size(), 90u);
}

TEST(RecordingGrid, EvalEveryAddsMultiplesAndZeroHorizon) {
  const auto grid = recording_grid(5000, 1.5, 1000);
  for (std::uint64_t t : {1000u, 2000u, 3000u, 4000u, 5000u})
    EXPECT_TRUE(std::binary_search(grid.begin(), grid.end(), t)) << t;
  EXPECT_EQ(recording_grid(0, 1.15), std::vector<std::uint64_t>{0});
}

TEST(TimeAvgHessianMse, ConstantSeries) {
  const auto s = time_avg_hessian_mse(trace_of({0, 1, 5, 20}, {3, 3, 3, 3}, Metric::HessErrSq), 0);
  for (double v : s.value) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(TimeAvgHessianMse, HandAverage) {
  const auto s = time_avg_hessian_mse(trace_of({0, 1}, {4, 0}, Metric::HessErrSq), 0);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.value[0], 4.0);
  EXPECT_DOUBLE_EQ(s.value[1], 2.0);
}

TEST(TimeAvgHessianMse, HoldsValuesBetweenRecordedPoints) {
  // m = 0..3 -> 2, 2, 2, 6 ; then m = 4..9 -> 6 x5 and 1 at m = 9.
  const auto s = time_avg_hessian_mse(trace_of({0, 3, 9}, {2, 6, 1}, Metric::HessErrSq), 0);
  EXPECT_DOUBLE_EQ(s.value[1], 12.0 / 4.0);
  EXPECT_DOUBLE_EQ(s.value[2], (12.0 + 5 * 6.0 + 1.0) / 10.0);
}

TEST(TimeAvgHessianMse, BurnInStartsTheAverage) {
  const auto s = time_avg_hessian_mse(trace_of({0, 3, 9}, {100, 6, 1}, Metric::HessErrSq), 3);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.t[0], 3.0);
  EXPECT_DOUBLE_EQ(s.value[0], 6.0);
  EXPECT_DOUBLE_EQ(s.value[1], (6.0 + 5 * 6.0 + 1.0) / 7.0);
}

TEST(TimeAvgHessianMse, MissingMetric) {
  EXPECT_EQ(kind_of([] { time_avg_hessian_mse(trace_of({0, 1}, {1, 2}), 0); }),
            ErrorKind::MissingMetric);
}

TEST(RunningMinGrad, Examples) {
  const auto single = running_min_grad({trace_of({0, 1, 2}, {3, 5, 1})});
  EXPECT_EQ(single.value, (std::vector<double>{3, 3, 1}));
  const auto twice = running_min_grad({trace_of({0, 1, 2}, {3, 5, 1}), trace_of({0, 1, 2}, {3, 5, 1})});
  EXPECT_EQ(twice.value, single.value);
  const auto mixed = running_min_grad({trace_of({0, 1, 2}, {3, 5, 1}), trace_of({0, 1, 2}, {1, 1, 3})});
  EXPECT_EQ(mixed.value, (std::vector<double>{2, 2, 2}));
}

TEST(RunningMinGrad, NonIncreasing) {
  std::vector<double> values;
  std::vector<std::uint64_t> t;
  for (int i = 0; i < 200; ++i) {
    t.push_back(i);
    values.push_back(1.0 + std::sin(i * 0.7) / (1 + i * 0.01));
  }
  const auto s = running_min_grad({trace_of(t, values)});
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s.value[i], s.value[i - 1]);
}

TEST(RunningMinGrad, GridMismatch) {
  EXPECT_EQ(kind_of([] { running_min_grad({trace_of({0, 1}, {1, 1}), trace_of({0, 2}, {1, 1})}); }),
            ErrorKind::GridMismatch);
}

TEST(LoglogSlope, ExactPowerLaw) {
  const auto fit = loglog_slope(power_law(1, 1e5, 1.15, [](double t) { return std::pow(t, -0.4); }));
  EXPECT_NEAR(fit.slope, -0.4, 1e-6);
  EXPECT_NEAR(fit.r2, 1.0, 1e-9);
}

TEST(LoglogSlope, Constant) {
  const auto fit = loglog_slope(power_law(1, 1e5, 1.15, [](double) { return 7.0; }));
  EXPECT_NEAR(fit.slope, 0.0, 1e-6);
}

TEST(LoglogSlope, DominantTermOfMixture) {
  const auto s = power_law(1e3, 1e5, 1.15, [](double t) { return 1.0 / t + std::pow(t, -0.4); });
  EXPECT_NEAR(loglog_slope(s, 1.0).slope, -0.4, 0.02);
}

TEST(LoglogSlope, WindowIsTheTrailingFraction) {
  // Slope -1 early, -0.25 late; the trailing half sees only the late part.
  const auto s = power_law(1, 1e6, 1.2, [](double t) {
    return t < 1000 ? std::pow(t, -1.0) : 1e-3 * std::pow(t / 1000, -0.25);
  });
  const auto fit = loglog_slope(s, 0.5);
  EXPECT_NEAR(fit.slope, -0.25, 1e-9);
  EXPECT_GE(fit.t_lo, 1000.0);
  EXPECT_DOUBLE_EQ(fit.t_hi, s.t.back());
}

TEST(LoglogSlope, SkipsTimeZero) {
  Series s = power_law(1, 1e4, 1.2, [](double t) { return 3.0 * std::pow(t, -0.6); });
  s.t.insert(s.t.begin(), 0.0);
  s.value.insert(s.value.begin(), 123.0);
  EXPECT_NEAR(loglog_slope(s, 1.0).slope, -0.6, 1e-9);
}

TEST(LoglogSlope, Errors) {
  Series s = power_law(1, 1e4, 1.2, [](double t) { return std::pow(t, -0.6); });
  s.value.back() = 0.0;
  EXPECT_EQ(kind_of([&] { loglog_slope(s); }), ErrorKind::NonPositiveValue);
  const Series tiny = power_law(1, 10, 1.5, [](double t) { return t; });
  EXPECT_THROW(loglog_slope(tiny), Error);
  EXPECT_THROW(loglog_slope(s, 0.0), Error);
}

TEST(AggregateSeeds, MeanAndStandardError) {
  RunTrace a = trace_of({0, 10}, {1, 2});
  RunTrace b = trace_of({0, 10}, {3, 2});
  RunTrace c = trace_of({0, 10}, {5, 2});
  const auto agg = aggregate_seeds({a, b, c});
  EXPECT_EQ(agg.n_seeds, 3u);
  EXPECT_EQ(agg.t, (std::vector<std::uint64_t>{0, 10}));
  const auto* g = agg.find(Metric::GradNormSq);
  ASSERT_NE(g, nullptr);
  EXPECT_DOUBLE_EQ(g->mean[0], 3.0);
  EXPECT_DOUBLE_EQ(g->se[0], 2.0 / std::sqrt(3.0));  // sd = 2
  EXPECT_DOUBLE_EQ(g->se[1], 0.0);
  EXPECT_EQ(agg.find(Metric::AvgCost), nullptr);
}

TEST(AggregateSeeds, NeedsTwoTracesOnOneGrid) {
  EXPECT_THROW(aggregate_seeds({trace_of({0}, {1})}), Error);
  EXPECT_EQ(kind_of([] { aggregate_seeds({trace_of({0}, {1}), trace_of({1}, {1})}); }),
            ErrorKind::GridMismatch);
}

TEST(MeanSeries, MissingMetric) {
  EXPECT_EQ(kind_of([] { mean_series({trace_of({0}, {1}), trace_of({0}, {1})}, Metric::AvgCost); }),
            ErrorKind::MissingMetric);
}

TEST(TraceCsv, SchemaAndRoundTrip) {
  RunTrace trace;
  trace.seed = 4;
  MetricRow r0;
  r0.t = 0;
  r0.grad_norm_sq = 0.1;
  r0.J_exact = 1.0 / 3.0;
  MetricRow r1;
  r1.t = 5;
  r1.avg_cost = 2e-17;
  trace.rows = {r0, r1};

  std::ostringstream out;
  write_trace_csv(out, trace);
  const std::string text = out.str();
  EXPECT_EQ(text,
            "t,seed,grad_norm_sq,hess_err_sq,z_err_sq,avg_cost,J_exact\n"
            "0,4,0.10000000000000001,,,,0.33333333333333331\n"
            "5,4,,,,2.0000000000000001e-17,\n");

  std::istringstream in(text);
  const auto back = read_trace_csv(in);
  EXPECT_EQ(back.seed, 4u);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0].grad_norm_sq, r0.grad_norm_sq);
  EXPECT_EQ(back.rows[0].J_exact, r0.J_exact);
  EXPECT_FALSE(back.rows[0].hess_err_sq);
  EXPECT_EQ(back.rows[1].avg_cost, r1.avg_cost);
  EXPECT_FALSE(back.rows[1].J_exact);
}

TEST(TraceCsv, RejectsBadInput) {
  std::istringstream bad_header("t,seed\n0,1\n");
  EXPECT_EQ(kind_of([&] { read_trace_csv(bad_header); }), ErrorKind::ParseError);
  std::istringstream bad_row(std::string(kTraceCsvHeader) + "\n0,1,2\n");
  EXPECT_EQ(kind_of([&] { read_trace_csv(bad_row); }), ErrorKind::ParseError);
}

TEST(AggregateCsv, Columns) {
  const auto agg = aggregate_seeds({trace_of({0, 1}, {1, 2}), trace_of({0, 1}, {3, 4})});
  std::ostringstream out;
  write_aggregate_csv(out, agg);
  std::istringstream in(out.str());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "t,n_seeds,grad_norm_sq_mean,grad_norm_sq_se");
  EXPECT_EQ(first, "0,2,2,1");
}

TEST(Metric, NamesRoundTrip) {
  for (Metric m : kAllMetrics) EXPECT_EQ(parse_metric(to_string(m)), m);
  EXPECT_THROW(parse_metric("nope"), Error);
}

}  // namespace
}  // namespace sfopt
