#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sfopt/error.hpp"
#include "sfopt/recursions.hpp"

namespace sfopt::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::OrderingViolation:
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError:
    case ErrorKind::EnvMismatch:
    case ErrorKind::EmptyGrid:
    case ErrorKind::DimensionMismatch:
      return kValidationFailure;
    default:
      return kRuntimeFailure;
  }
}

fs::path checkpoint_file(const fs::path& dir, std::uint64_t seed) {
  return dir / fmt::format("checkpoint_seed{}.txt", seed);
}

std::vector<RunTrace> run_seeds(const ExperimentConfig& config,
                                const std::vector<std::uint64_t>& seeds,
                                const ExecutionOptions& exec,
                                const std::optional<fs::path>& checkpoint_dir) {
  std::vector<RunTrace> traces(seeds.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      ExperimentConfig cfg = config;
      cfg.seed = seeds[i];
      try {
        auto env = make_env(cfg.env);
        RunOptions options;
        if (checkpoint_dir && exec.checkpoint_every > 0) {
          options.checkpoint_every = exec.checkpoint_every;
          options.checkpoint_path = checkpoint_file(*checkpoint_dir, cfg.seed);
        }
        if (checkpoint_dir && exec.resume && fs::exists(checkpoint_file(*checkpoint_dir, cfg.seed))) {
          spdlog::info("seed {}: resuming from {}", cfg.seed,
                       checkpoint_file(*checkpoint_dir, cfg.seed).string());
          traces[i] = resume(cfg, *env, checkpoint_file(*checkpoint_dir, cfg.seed), options);
        } else {
          traces[i] = run(cfg, *env, options);
        }
      } catch (const std::exception& e) {
        traces[i].seed = cfg.seed;
        traces[i].config_hash = config_hash(cfg);
        traces[i].status = RunStatus::Failed;
        traces[i].failure = e.what();
      }
      if (traces[i].status == RunStatus::Failed) {
        spdlog::error("seed {} failed: {}", cfg.seed, traces[i].failure);
      } else {
        spdlog::debug("seed {} done ({} rows)", cfg.seed, traces[i].rows.size());
      }
    }
  };

  unsigned jobs = exec.jobs ? exec.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, seeds.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return traces;
}

namespace {

bool metric_everywhere(const std::vector<RunTrace>& traces, Metric metric) {
  if (traces.empty()) return false;
  for (const auto& trace : traces) {
    if (trace.rows.empty()) return false;
    for (const auto& row : trace.rows)
      if (!metric_value(row, metric)) return false;
  }
  return true;
}

std::vector<RunTrace> successful(const std::vector<RunTrace>& traces) {
  std::vector<RunTrace> ok;
  for (const auto& t : traces)
    if (t.status == RunStatus::Completed) ok.push_back(t);
  return ok;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, fmt::format("cannot write '{}'", path.string()));
  fn(out);
}

nlohmann::json fit_json(const MetricSummary& m, std::size_t n_seeds) {
  nlohmann::json j;
  j["metric"] = std::string(to_string(m.metric));
  j["series"] = m.metric == Metric::GradNormSq ? "running_min_of_seed_mean" : "seed_mean";
  j["n_seeds"] = n_seeds;
  if (m.fit) {
    j["slope"] = m.fit->slope;
    j["r2"] = m.fit->r2;
    j["window"] = {m.fit->t_lo, m.fit->t_hi};
  } else {
    j["slope"] = nullptr;
    j["r2"] = nullptr;
    j["window"] = nullptr;
  }
  j["initial"] = m.initial ? nlohmann::json(*m.initial) : nlohmann::json(nullptr);
  j["final"] = m.final ? nlohmann::json(*m.final) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

std::vector<MetricSummary> summarize(const std::vector<RunTrace>& traces, double window_fraction) {
  std::vector<MetricSummary> out;
  for (Metric metric : kAllMetrics) {
    if (!metric_everywhere(traces, metric)) continue;
    MetricSummary s{metric, std::nullopt, std::nullopt, std::nullopt};
    const Series series =
        metric == Metric::GradNormSq ? running_min_grad(traces) : mean_series(traces, metric);
    if (!series.value.empty()) {
      s.initial = series.value.front();
      s.final = series.value.back();
    }
    try {
      s.fit = loglog_slope(series, window_fraction);
    } catch (const Error& e) {
      spdlog::debug("no slope for {}: {}", to_string(metric), e.what());
    }
    out.push_back(s);
  }
  return out;
}

nlohmann::json summary_json(const ExperimentConfig& config, const std::vector<RunTrace>& traces,
                            const std::vector<MetricSummary>& metrics) {
  nlohmann::json j;
  j["config_hash"] = config_hash(config);
  j["algorithm"] = std::string(to_string(config.algorithm));
  std::vector<std::uint64_t> ok, failed;
  for (const auto& t : traces) (t.status == RunStatus::Completed ? ok : failed).push_back(t.seed);
  j["seeds"] = ok;
  j["failed_seeds"] = failed;
  j["metrics"] = nlohmann::json::array();
  for (const auto& m : metrics) j["metrics"].push_back(fit_json(m, ok.size()));
  return j;
}

RunReport cmd_run(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds,
                  const fs::path& out_dir, const ExecutionOptions& exec) {
  if (seeds.empty()) throw Error(ErrorKind::ValidationError, "no seeds given");
  fs::create_directories(out_dir);
  write_file(out_dir / "config.toml", to_toml(config));

  RunReport report;
  report.traces = run_seeds(config, seeds, exec, out_dir);
  for (const auto& trace : report.traces) {
    write_stream(out_dir / fmt::format("seed_{}.csv", trace.seed),
                 [&](std::ostream& out) { write_trace_csv(out, trace); });
    if (trace.status != RunStatus::Completed) ++report.failed;
  }

  const auto ok = successful(report.traces);
  if (ok.size() >= 2) {
    const Aggregate agg = aggregate_seeds(ok);
    write_stream(out_dir / "aggregate.csv", [&](std::ostream& out) { write_aggregate_csv(out, agg); });
  }
  report.metrics = summarize(ok);
  write_file(out_dir / "summary.json", summary_json(config, report.traces, report.metrics).dump(2) + "\n");

  if (report.failed == seeds.size()) {
    report.exit_code = kRuntimeFailure;
  } else if (report.failed > 0) {
    report.exit_code = kPartialFailure;
  }
  return report;
}

std::vector<SweepCell> grid_cells(const std::vector<double>& sigmas,
                                  const std::vector<double>& alphas,
                                  const std::vector<double>& nus) {
  std::vector<SweepCell> cells;
  for (double s : sigmas)
    for (double a : alphas) {
      if (nus.empty()) {
        cells.push_back({s, a, std::nullopt});
      } else {
        for (double n : nus) cells.push_back({s, a, n});
      }
    }
  return cells;
}

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& base, const std::vector<SweepCell>& cells,
                                const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                                const ExecutionOptions& exec) {
  if (cells.empty()) throw Error(ErrorKind::EmptyGrid, "sweep grid has no cells");
  fs::create_directories(out_dir);
  const Metric selection =
      std::holds_alternative<ChainEnvSpec>(base.env) ? Metric::GradNormSq : Metric::AvgCost;

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    SweepRow row;
    row.cell = cells[i];
    row.index = i;
    row.selection = selection;

    ExperimentConfig cfg = base;
    cfg.schedule.sigma = cells[i].sigma;
    cfg.schedule.alpha = cells[i].alpha;
    cfg.schedule.nu = cells[i].nu;
    try {
      validate(cfg);
    } catch (const Error& e) {
      row.skipped = true;
      row.reason = e.what();
      spdlog::warn("sweep cell {} skipped: {}", i, e.what());
      rows.push_back(row);
      continue;
    }
    std::vector<std::uint64_t> cell_seeds;
    for (auto s : seeds) cell_seeds.push_back(s + i);
    const RunReport report = cmd_run(cfg, cell_seeds, out_dir / fmt::format("cell_{}", i), exec);
    for (const auto& m : report.metrics)
      if (m.metric == selection) row.fit = m.fit;
    if (report.failed > 0) row.reason = fmt::format("{} seed(s) failed", report.failed);
    rows.push_back(row);
  }

  SweepRow* best = nullptr;
  for (auto& row : rows)
    if (row.fit && (!best || row.fit->slope < best->fit->slope)) best = &row;
  if (best) best->best = true;

  write_stream(out_dir / "sweep.csv", [&](std::ostream& out) {
    out << "cell,sigma,alpha,nu,status,metric,slope,r2,best\n";
    for (const auto& r : rows) {
      out << r.index << ',' << format_g17(r.cell.sigma) << ',' << format_g17(r.cell.alpha) << ','
          << (r.cell.nu ? format_g17(*r.cell.nu) : std::string()) << ','
          << (r.skipped ? "skipped" : "ran") << ',' << to_string(r.selection) << ','
          << (r.fit ? format_g17(r.fit->slope) : std::string()) << ','
          << (r.fit ? format_g17(r.fit->r2) : std::string()) << ',' << (r.best ? 1 : 0) << '\n';
    }
  });
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json cell;
    cell["cell"] = r.index;
    cell["sigma"] = r.cell.sigma;
    cell["alpha"] = r.cell.alpha;
    cell["nu"] = r.cell.nu ? nlohmann::json(*r.cell.nu) : nlohmann::json(nullptr);
    cell["skipped"] = r.skipped;
    if (!r.reason.empty()) cell["reason"] = r.reason;
    cell["metric"] = std::string(to_string(r.selection));
    cell["slope"] = r.fit ? nlohmann::json(r.fit->slope) : nlohmann::json(nullptr);
    cell["r2"] = r.fit ? nlohmann::json(r.fit->r2) : nlohmann::json(nullptr);
    cell["best"] = r.best;
    j.push_back(cell);
  }
  write_file(out_dir / "sweep.json", j.dump(2) + "\n");
  return rows;
}

CompareReport cmd_compare(const ExperimentConfig& a, const ExperimentConfig& b,
                          const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                          const ExecutionOptions& exec) {
  if (!(a.env == b.env)) {
    throw Error(ErrorKind::EnvMismatch, "compared configs use different environments");
  }
  fs::create_directories(out_dir);
  CompareReport report{cmd_run(a, seeds, out_dir / "A", exec), cmd_run(b, seeds, out_dir / "B", exec)};

  const auto ok_a = successful(report.a.traces);
  const auto ok_b = successful(report.b.traces);
  nlohmann::json j;
  j["A"] = summary_json(a, report.a.traces, report.a.metrics);
  j["B"] = summary_json(b, report.b.traces, report.b.metrics);

  if (!ok_a.empty() && !ok_b.empty()) {
    std::vector<Metric> shared;
    for (Metric m : kAllMetrics)
      if (metric_everywhere(ok_a, m) && metric_everywhere(ok_b, m)) shared.push_back(m);
    std::vector<Series> sa, sb;
    for (Metric m : shared) {
      sa.push_back(mean_series(ok_a, m));
      sb.push_back(mean_series(ok_b, m));
    }
    if (!shared.empty() && sa.front().t != sb.front().t) {
      throw Error(ErrorKind::GridMismatch, "compared runs use different recording grids");
    }
    write_stream(out_dir / "compare.csv", [&](std::ostream& out) {
      out << 't';
      for (Metric m : shared) out << ",A_" << to_string(m) << "_mean,B_" << to_string(m) << "_mean";
      out << '\n';
      const std::size_t n = shared.empty() ? 0 : sa.front().size();
      for (std::size_t i = 0; i < n; ++i) {
        out << static_cast<std::uint64_t>(sa.front().t[i]);
        for (std::size_t k = 0; k < shared.size(); ++k) {
          out << ',' << format_g17(sa[k].value[i]) << ',' << format_g17(sb[k].value[i]);
        }
        out << '\n';
      }
    });
    for (std::size_t k = 0; k < shared.size(); ++k) {
      if (shared[k] != Metric::AvgCost) continue;
      const double fa = sa[k].value.back();
      const double fb = sb[k].value.back();
      j["final_avg_cost"] = {{"A", fa}, {"B", fb}, {"lower", fa < fb ? "A" : fb < fa ? "B" : "tie"}};
    }
  }
  write_file(out_dir / "compare.json", j.dump(2) + "\n");
  return report;
}

RateFit cmd_slope(const std::vector<fs::path>& csv_files, Metric metric, double window_fraction,
                  bool running_min) {
  if (csv_files.empty()) throw Error(ErrorKind::ValidationError, "no input CSV files");
  std::vector<RunTrace> traces;
  for (const auto& path : csv_files) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, fmt::format("cannot open '{}'", path.string()));
    traces.push_back(read_trace_csv(in));
  }
  Series series = mean_series(traces, metric);
  if (running_min) {
    double best = std::numeric_limits<double>::infinity();
    for (double& v : series.value) v = best = std::min(best, v);
  }
  return loglog_slope(series, window_fraction);
}

}  // namespace sfopt::cli
