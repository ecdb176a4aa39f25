#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "sfopt/error.hpp"

namespace {

using namespace sfopt;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("sfopt");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("SFOPT_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

/// "1,2,3" style lists where an item may also be an inclusive range "1-5".
std::vector<std::uint64_t> expand_seeds(const std::vector<std::string>& items) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : items) {
    const auto dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item));
      } else {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw Error(ErrorKind::ValidationError, fmt::format("empty seed range '{}'", item));
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::ValidationError, fmt::format("bad seed '{}'", item));
    }
  }
  return seeds;
}

std::vector<std::uint64_t> seeds_or_default(const std::vector<std::string>& items,
                                            const ExperimentConfig& config) {
  return items.empty() ? std::vector<std::uint64_t>{config.seed} : expand_seeds(items);
}

void print_fits(const std::vector<cli::MetricSummary>& metrics) {
  for (const auto& m : metrics) {
    if (!m.fit) continue;
    std::cout << fmt::format("{:<14} slope {:+.4f}  r2 {:.3f}  window [{}, {}]\n",
                             to_string(m.metric), m.fit->slope, m.fit->r2, m.fit->t_lo, m.fit->t_hi);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Smoothed-functional multi-timescale optimizers (GSF1, NSF1, Jacobi NSF1)"};
  app.require_subcommand(1);

  cli::ExecutionOptions exec;

  // run
  std::string run_config, run_out;
  std::vector<std::string> run_seeds, run_sets;
  auto* run_cmd = app.add_subcommand("run", "Run one config over one or more seeds");
  run_cmd->add_option("--config", run_config, "Experiment TOML file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run_out, "Output directory")->required();
  run_cmd->add_option("--seeds", run_seeds, "Seeds, e.g. 1,2,3 or 1-5")->delimiter(',');
  run_cmd->add_option("--set", run_sets, "Override section.key=value");
  run_cmd->add_option("--checkpoint-every", exec.checkpoint_every, "Checkpoint interval in iterations");
  run_cmd->add_flag("--resume", exec.resume, "Resume seeds from checkpoints in --out");
  run_cmd->add_option("--jobs", exec.jobs, "Worker threads (0 = all cores)");

  // sweep
  std::string sweep_config, sweep_out;
  std::vector<std::string> sweep_seeds, sweep_sets, sweep_cells;
  std::vector<double> sigmas, alphas, nus;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid over step-size exponents");
  sweep_cmd->add_option("--config", sweep_config, "Base experiment TOML file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep_out, "Output directory")->required();
  sweep_cmd->add_option("--seeds", sweep_seeds, "Seeds, e.g. 1,2,3 or 1-5")->delimiter(',');
  sweep_cmd->add_option("--set", sweep_sets, "Override section.key=value");
  sweep_cmd->add_option("--sigma", sigmas, "sigma values")->delimiter(',');
  sweep_cmd->add_option("--alpha", alphas, "alpha values")->delimiter(',');
  sweep_cmd->add_option("--nu", nus, "nu values")->delimiter(',');
  sweep_cmd->add_option("--cell", sweep_cells, "Explicit cell sigma:alpha[:nu]");
  sweep_cmd->add_option("--jobs", exec.jobs, "Worker threads (0 = all cores)");

  // slope
  std::vector<std::string> slope_inputs;
  std::string slope_metric = "grad_norm_sq";
  double slope_window = 0.5;
  bool slope_running_min = false;
  auto* slope_cmd = app.add_subcommand("slope", "Fit a log-log slope to trace CSVs");
  slope_cmd->add_option("--input", slope_inputs, "Per-seed trace CSV files")->required()->check(CLI::ExistingFile);
  slope_cmd->add_option("--metric", slope_metric, "Metric column");
  slope_cmd->add_option("--window", slope_window, "Trailing fraction of points to fit");
  slope_cmd->add_flag("--running-min", slope_running_min, "Fit the running minimum of the seed mean");

  // compare
  std::vector<std::string> compare_configs, compare_seeds, compare_sets;
  std::string compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "Run two configs on the same seeds");
  compare_cmd->add_option("--config", compare_configs, "Two experiment TOML files (A then B)")
      ->required()->expected(2)->check(CLI::ExistingFile);
  compare_cmd->add_option("--out", compare_out, "Output directory")->required();
  compare_cmd->add_option("--seeds", compare_seeds, "Seeds, e.g. 1,2,3 or 1-5")->delimiter(',');
  compare_cmd->add_option("--set", compare_sets, "Override applied to both configs");
  compare_cmd->add_option("--jobs", exec.jobs, "Worker threads (0 = all cores)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto config = parse_config(run_config, run_sets);
      const auto report = cli::cmd_run(config, seeds_or_default(run_seeds, config), run_out, exec);
      print_fits(report.metrics);
      std::cout << fmt::format("{} seed(s), {} failed; results in {}\n", report.traces.size(),
                               report.failed, run_out);
      return report.exit_code;
    }
    if (*sweep_cmd) {
      const auto base = parse_config(sweep_config, sweep_sets);
      auto cells = cli::grid_cells(sigmas, alphas, nus);
      if (sigmas.empty() || alphas.empty()) cells.clear();
      for (const auto& text : sweep_cells) {
        std::vector<double> parts;
        std::string item;
        std::istringstream in(text);
        while (std::getline(in, item, ':')) parts.push_back(parse_double(item));
        if (parts.size() < 2 || parts.size() > 3) {
          throw Error(ErrorKind::ValidationError, fmt::format("cell '{}': expected sigma:alpha[:nu]", text));
        }
        cells.push_back({parts[0], parts[1], parts.size() == 3 ? std::optional<double>(parts[2]) : std::nullopt});
      }
      const auto rows = cli::cmd_sweep(base, cells, seeds_or_default(sweep_seeds, base), sweep_out, exec);
      for (const auto& r : rows) {
        std::cout << fmt::format("cell {:>3}  sigma {:.3f} alpha {:.3f} nu {:>6}  {}{}\n", r.index,
                                 r.cell.sigma, r.cell.alpha,
                                 r.cell.nu ? fmt::format("{:.3f}", *r.cell.nu) : "-",
                                 r.skipped ? "skipped" : (r.fit ? fmt::format("slope {:+.4f}", r.fit->slope) : "no fit"),
                                 r.best ? "  <- best" : "");
      }
      return cli::kSuccess;
    }
    if (*slope_cmd) {
      std::vector<std::filesystem::path> files(slope_inputs.begin(), slope_inputs.end());
      const auto fit = cli::cmd_slope(files, parse_metric(slope_metric), slope_window, slope_running_min);
      nlohmann::json j{{"metric", slope_metric},
                       {"slope", fit.slope},
                       {"r2", fit.r2},
                       {"window", {fit.t_lo, fit.t_hi}},
                       {"n_seeds", files.size()}};
      std::cout << j.dump(2) << '\n';
      return cli::kSuccess;
    }
    if (*compare_cmd) {
      const auto a = parse_config(compare_configs.at(0), compare_sets);
      const auto b = parse_config(compare_configs.at(1), compare_sets);
      const auto report = cli::cmd_compare(a, b, seeds_or_default(compare_seeds, a), compare_out, exec);
      std::cout << "A:\n";
      print_fits(report.a.metrics);
      std::cout << "B:\n";
      print_fits(report.b.metrics);
      return std::max(report.a.exit_code, report.b.exit_code);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return cli::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return cli::kRuntimeFailure;
  }
  return cli::kSuccess;
}
