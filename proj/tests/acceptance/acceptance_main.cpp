// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "sfopt/chain_oracle.hpp"
#include "sfopt/config.hpp"
#include "sfopt/diagnostics.hpp"
#include "sfopt/environments.hpp"
#include "sfopt/error.hpp"
#include "sfopt/estimators.hpp"
#include "sfopt/recursions.hpp"

namespace fs = std::filesystem;
using namespace sfopt;

namespace {

// Tolerances, pinned.
constexpr double kMcSigmas = 3.0;           // 1, 11
constexpr double kFdRelTol = 1e-6;          // 2
constexpr double kBalanceTol = 1e-10;       // 3
constexpr double kFundamentalTol = 1e-8;    // 3
constexpr double kEigRoundoff = 1e-12;      // 4, relative to max(1, |H|_F)
constexpr double kSlopeBound = -0.25;       // 5, 6
constexpr double kHessDecayFactor = 0.5;    // 7
constexpr double kExactSlopeTol = 1e-6;     // 8
constexpr double kMixtureSlopeTol = 0.02;   // 8
constexpr int kCarSeedsRequired = 4;        // 9

struct Outcome {
  bool pass = false;
  std::string detail;
};

ExperimentConfig load(const char* name) { return parse_config(fs::path(SFOPT_CONFIG_DIR) / name); }

std::string csv_of(const RunTrace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

RunTrace run_seed(ExperimentConfig c, std::uint64_t seed, const RunOptions& options = {}) {
  c.seed = seed;
  auto env = make_env(c.env);
  return run(c, *env, options);
}

std::vector<RunTrace> run_seeds(const ExperimentConfig& c, std::uint64_t first, int count) {
  std::vector<RunTrace> traces;
  for (int i = 0; i < count; ++i) {
    traces.push_back(run_seed(c, first + static_cast<std::uint64_t>(i)));
    if (traces.back().status != RunStatus::Completed)
      throw Error(ErrorKind::ValidationError, "seed failed: " + traces.back().failure);
  }
  return traces;
}

Matrix random_stochastic(Rng& rng, int n) {
  Matrix P(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) P(i, j) = 0.05 + rng.uniform();
    P.row(i) /= P.row(i).sum();
  }
  return P;
}

Vector random_theta(Rng& rng, int d, double scale) {
  Vector theta(d);
  for (int k = 0; k < d; ++k) theta[k] = scale * (2.0 * rng.uniform() - 1.0);
  return theta;
}

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  double se() const { return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)); }
};

// 1 -----------------------------------------------------------------------
Outcome estimator_unbiasedness() {
  Matrix A(2, 2);
  A << 2, 1, 1, 4;
  const Vector theta = (Vector(2) << 0.3, -0.2).finished();
  const double beta = 0.05;
  const long samples = 1'000'000;

  std::vector<Welford> g(2), h(4);
  Rng rng(mix_seed(20240601, 0));
  for (long n = 0; n < samples; ++n) {
    const auto p = sample_perturbation(rng, 2);
    const Vector x = theta + beta * p.eta;
    const double cost = 0.5 * x.dot(A * x);
    const auto gs = sf_gradient_sample(p, beta, cost);
    const auto hs = sf_hessian_sample(p, beta, cost);
    for (int i = 0; i < 2; ++i) g[i].add(gs.g_hat[i]);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) h[2 * i + j].add(hs.h_hat(i, j));
  }
  const Vector target_g = A * theta;
  double worst = 0.0;
  for (int i = 0; i < 2; ++i) worst = std::max(worst, std::abs(g[i].mean - target_g[i]) / g[i].se());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const auto& w = h[2 * i + j];
      worst = std::max(worst, std::abs(w.mean - A(i, j)) / w.se());
    }
  return {worst <= kMcSigmas,
          fmt::format("grad mean ({:.4f}, {:.4f}) vs ({}, {}); hess mean [[{:.3f}, {:.3f}], [{:.3f}, {:.3f}]]; "
                      "worst deviation {:.2f} SE (limit {})",
                      g[0].mean, g[1].mean, target_g[0], target_g[1], h[0].mean, h[1].mean, h[2].mean,
                      h[3].mean, worst, kMcSigmas)};
}

// 2 -----------------------------------------------------------------------
Outcome gradient_formula() {
  Rng rng(77);
  double worst = 0.0;
  const double delta = 1e-5;
  for (int m = 0; m < 100; ++m) {
    ChainEnvSpec spec;
    spec.gen_seed = 1000 + static_cast<std::uint64_t>(m);
    const auto model = SoftmaxChainModel::generate(spec);
    const Vector theta = random_theta(rng, 3, 1.5);
    const Vector g = grad_J(model, theta);
    for (int k = 0; k < 3; ++k) {
      Vector up = theta, down = theta;
      up[k] += delta;
      down[k] -= delta;
      const double fd = (average_cost(model, up) - average_cost(model, down)) / (2 * delta);
      worst = std::max(worst, std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
    }
  }
  return {worst <= kFdRelTol,
          fmt::format("100 models, worst relative error {:.3e} (limit {:.0e})", worst, kFdRelTol)};
}

// 3 -----------------------------------------------------------------------
Outcome oracle_identities() {
  Rng rng(5);
  double balance = 0.0, fundamental = 0.0;
  for (int m = 0; m < 100; ++m) {
    const int n = 2 + static_cast<int>(rng.uniform() * 9);
    const Matrix P = random_stochastic(rng, n);
    const Vector pi = stationary_distribution(P);
    const Matrix Z = fundamental_matrix(P, pi);
    balance = std::max(balance, (pi.transpose() * P - pi.transpose()).cwiseAbs().maxCoeff());
    const Matrix M = Matrix::Identity(n, n) - P + Vector::Ones(n) * pi.transpose();
    fundamental = std::max(fundamental, (Z * M - Matrix::Identity(n, n)).cwiseAbs().maxCoeff());
  }
  return {balance <= kBalanceTol && fundamental <= kFundamentalTol,
          fmt::format("100 chains, |pi P - pi| {:.2e} (limit {:.0e}), |Z M - I| {:.2e} (limit {:.0e})",
                      balance, kBalanceTol, fundamental, kFundamentalTol)};
}

// 4 -----------------------------------------------------------------------
Outcome pd_safety() {
  const auto c = load("chain_nsf1.toml");
  std::size_t rows = 0, bad_eig = 0, outside = 0;
  double lowest = std::numeric_limits<double>::infinity();
  RunOptions opt;
  opt.on_record = [&](const OptimizerState& s, const MetricRow& row) {
    ++rows;
    if (s.t > 0) {
      const double lam = Eigen::SelfAdjointEigenSolver<Matrix>(s.H).eigenvalues().minCoeff();
      lowest = std::min(lowest, lam);
      if (lam < c.pd_floor - kEigRoundoff * std::max(1.0, s.H.norm())) ++bad_eig;
      if (!row.hpd_min_eig || *row.hpd_min_eig < c.pd_floor - kEigRoundoff * std::max(1.0, s.H.norm()))
        ++bad_eig;
    }
    if ((s.theta.array() < c.box_lower.array()).any() || (s.theta.array() > c.box_upper.array()).any())
      ++outside;
  };
  const auto trace = run_seed(c, c.seed, opt);
  const bool ok = trace.status == RunStatus::Completed && bad_eig == 0 && outside == 0 && rows > 0;
  return {ok, fmt::format("T={}, {} rows, min eigenvalue {:.6g} (floor {}), {} below floor, {} outside C",
                          c.horizon, rows, lowest, c.pd_floor, bad_eig, outside)};
}

// 5, 6 --------------------------------------------------------------------
Outcome rate_check(const char* file) {
  const auto c = load(file);
  const auto traces = run_seeds(c, 1, 5);
  const Series series = running_min_grad(traces);
  const RateFit fit = loglog_slope(series, 0.5);
  const double drop = series.value.front() / series.value.back();
  return {fit.slope <= kSlopeBound,
          fmt::format("{} seeds 1-5, T={}: slope {:.4f} (bound {}), r2 {:.3f}, window [{}, {}], "
                      "running min fell by x{:.1f}",
                      to_string(c.algorithm), c.horizon, fit.slope, kSlopeBound, fit.r2, fit.t_lo,
                      fit.t_hi, drop)};
}

// 7 -----------------------------------------------------------------------
Outcome hessian_decay() {
  const auto c = load("chain_nsf1.toml");
  const auto traces = run_seeds(c, 1, 5);
  std::vector<double> t_axis;
  std::vector<double> mean;
  for (const auto& trace : traces) {
    const Series s = time_avg_hessian_mse(trace, c.burn_in);
    if (mean.empty()) {
      t_axis = s.t;
      mean.assign(s.size(), 0.0);
    }
    for (std::size_t i = 0; i < s.size(); ++i) mean[i] += s.value[i] / static_cast<double>(traces.size());
  }
  std::size_t early = 0;
  for (std::size_t i = 0; i < t_axis.size(); ++i)
    if (t_axis[i] <= 1000.0) early = i;
  const double ratio = mean.back() / mean[early];
  return {ratio <= kHessDecayFactor,
          fmt::format("time-averaged |H - hess J|_F^2: {:.4g} at t={} vs {:.4g} at t={}, ratio {:.3f} "
                      "(limit {})",
                      mean.back(), t_axis.back(), mean[early], t_axis[early], ratio, kHessDecayFactor)};
}

// 8 -----------------------------------------------------------------------
Outcome slope_calibration() {
  const auto grid = recording_grid(100000, 1.15);
  Series exact, mixture;
  for (auto t : grid) {
    if (t == 0) continue;
    const double x = static_cast<double>(t);
    exact.t.push_back(x);
    exact.value.push_back(3.0 * std::pow(x, -0.4));
    if (t >= 1000) {
      mixture.t.push_back(x);
      mixture.value.push_back(1.0 / x + std::pow(x, -0.4));
    }
  }
  const double s1 = loglog_slope(exact, 0.5).slope;
  const double s2 = loglog_slope(mixture, 1.0).slope;
  const bool ok = std::abs(s1 + 0.4) <= kExactSlopeTol && std::abs(s2 + 0.4) <= kMixtureSlopeTol;
  return {ok, fmt::format("t^-0.4 -> {:.9f} (tol {:.0e}); t^-1 + t^-0.4 on [1e3, 1e5] -> {:.4f} (tol {})",
                          s1, kExactSlopeTol, s2, kMixtureSlopeTol)};
}

// 9 -----------------------------------------------------------------------
Outcome mountain_car() {
  bool ok = true;
  std::string detail;
  for (const char* file : {"mountaincar_gsf1.toml", "mountaincar_nsf1_diag.toml"}) {
    const auto c = load(file);
    int improved = 0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto trace = run_seed(c, seed);
      std::optional<double> early, late;
      for (const auto& row : trace.rows) {
        if (row.t == 1000) early = row.avg_cost;
        if (row.t == c.horizon) late = row.avg_cost;
      }
      if (trace.status != RunStatus::Completed || !early || !late) {
        per_seed += fmt::format(" s{}:missing", seed);
        continue;
      }
      if (*late < *early) ++improved;
      per_seed += fmt::format(" s{}:{:.6g}->{:.6g} ({:+.2g})", seed, *early, *late, *late - *early);
    }
    ok = ok && improved >= kCarSeedsRequired;
    detail += fmt::format("{} {}/5 improved [{} ]; ", to_string(c.algorithm), improved, per_seed);
  }
  detail += fmt::format("need >= {} of 5 for both", kCarSeedsRequired);
  return {ok, detail};
}

// 10 ----------------------------------------------------------------------
bool resume_everywhere(ExperimentConfig c, std::uint64_t every, std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / fmt::format("sfopt_accept_{}", to_string(c.algorithm));
  fs::create_directories(dir);
  const std::string reference = csv_of(run_seed(c, c.seed));
  if (reference != csv_of(run_seed(c, c.seed))) {
    detail += fmt::format("{}: rerun differs; ", to_string(c.algorithm));
    return false;
  }
  int resumed = 0, mismatched = 0;
  for (std::uint64_t k = 0; k < c.horizon; k += every) {
    RunOptions stop;
    stop.checkpoint_every = every;
    stop.checkpoint_path = dir / "cp.txt";
    stop.stop_at = k;
    if (run_seed(c, c.seed, stop).status != RunStatus::Interrupted) ++mismatched;
    RunOptions cont;
    cont.checkpoint_every = every;
    cont.checkpoint_path = dir / "cp2.txt";
    auto env = make_env(c.env);
    if (csv_of(resume(c, *env, stop.checkpoint_path, cont)) != reference) ++mismatched;
    ++resumed;
  }
  fs::remove_all(dir);
  detail += fmt::format("{} ({}): {} checkpoints, {} mismatches; ", to_string(c.algorithm),
                        std::holds_alternative<ChainEnvSpec>(c.env) ? "chain" : "mountaincar", resumed,
                        mismatched);
  return mismatched == 0;
}

Outcome determinism_and_resume() {
  std::string detail;
  bool ok = resume_everywhere(load("chain_nsf1.toml"), 10000, detail);
  ok = resume_everywhere(load("chain_gsf1.toml"), 10000, detail) && ok;
  auto car = load("mountaincar_nsf1_diag.toml");
  car.horizon = 20000;
  car.eval_window = 1000;
  ok = resume_everywhere(car, 2500, detail) && ok;
  return {ok, detail + "byte-identical CSV required"};
}

// 11 ----------------------------------------------------------------------
Outcome timescale_decoupling() {
  const auto c = load("chain_frozen_quadratic.toml");
  const int seeds = 10;
  const int d = env_dim(c.env);
  std::vector<Welford> entries(static_cast<std::size_t>(d * d));
  for (int s = 1; s <= seeds; ++s) {
    Matrix final_H;
    RunOptions opt;
    opt.on_record = [&](const OptimizerState& state, const MetricRow&) {
      if (state.t == c.horizon) final_H = state.H;
    };
    const auto trace = run_seed(c, static_cast<std::uint64_t>(s), opt);
    if (trace.status != RunStatus::Completed || final_H.size() == 0) return {false, "run failed"};
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) entries[static_cast<std::size_t>(i * d + j)].add(final_H(i, j));
  }
  auto env = make_env(c.env);
  const Matrix target = hess_J(*env->oracle(), c.theta0);
  double worst = 0.0;
  std::string means;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const auto& w = entries[static_cast<std::size_t>(i * d + j)];
      worst = std::max(worst, std::abs(w.mean - target(i, j)) / w.se());
      if (i == j) means += fmt::format(" {:.3f}+-{:.3f}", w.mean, w.se());
    }
  return {worst <= kMcSigmas,
          fmt::format("{} seeds, T={}: diagonal of mean H(T){} vs hess J diagonal ({:.3f}, {:.3f}, {:.3f}); "
                      "worst entry {:.2f} SE (limit {})",
                      seeds, c.horizon, means, target(0, 0), target(1, 1), target(2, 2), worst, kMcSigmas)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"estimator unbiasedness", estimator_unbiasedness},
      {"gradient formula vs finite differences", gradient_formula},
      {"oracle identities", oracle_identities},
      {"PD safety and feasibility", pd_safety},
      {"NSF1 rate", [] { return rate_check("chain_nsf1.toml"); }},
      {"GSF1 rate", [] { return rate_check("chain_gsf1.toml"); }},
      {"Hessian tracking decay", hessian_decay},
      {"slope fitter calibration", slope_calibration},
      {"MountainCar improvement", mountain_car},
      {"determinism and resume", determinism_and_resume},
      {"timescale decoupling", timescale_decoupling},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.pass) ++failures;
    std::printf("%s %d %s: %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL", id, criteria[i].first,
                outcome.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
