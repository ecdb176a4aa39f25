#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>

#include "sfopt/config.hpp"
#include "sfopt/core.hpp"
#include "sfopt/diagnostics.hpp"
#include "sfopt/environments.hpp"
#include "sfopt/estimators.hpp"

namespace sfopt {

struct OptimizerState {
  Vector theta;
  Matrix H;  // symmetric; positive definite after every NSF1 iteration
  Vector Z;
  std::uint64_t t = 0;
};

/// A symmetric matrix whose eigenvalues are all >= the floor it was
/// projected with.
struct PdMatrix {
  Matrix value;
  double min_eigenvalue = 0.0;
};

/// (1 - b) H + b h_hat; with diag_only the off-diagonal entries are zero.
Matrix hessian_track_step(const Matrix& H, const HessSample& h_hat, double b, bool diag_only);

/// (1 - c) Z + c g_hat.
Vector gradient_track_step(const Vector& Z, const GradSample& g_hat, double c);

/// Eigenvalue clipping at `eps`. Matrices already above the floor are
/// returned unchanged; diagonal matrices are clipped entrywise.
/// Throws NonFinite.
PdMatrix project_pd(const Matrix& H, double eps);

/// Solves Hpd d = Z (Cholesky). Throws SolveFailure when the relative
/// residual exceeds 1e-8.
Vector newton_direction(const PdMatrix& Hpd, const Vector& Z);

/// Componentwise clamp onto [lower, upper].
Vector project_box(const Vector& x, const Vector& lower, const Vector& upper);

/// theta(0) = clamp(theta0 or 0), H(0) = I, Z(0) = 0.
OptimizerState initial_state(const ExperimentConfig& config, int d);

/// One NSF1 iteration (Jacobi-diagonal when config.algorithm is NSF1_DIAG):
/// sample eta, one cost at theta + beta eta, H update, PD projection (the
/// projected matrix is what is stored), Z update, then
/// theta <- clamp(theta - a M Z) with the new H and Z.
OptimizerState nsf1_step(const OptimizerState& state, Env& env, const ExperimentConfig& config,
                         RunStreams& streams);

/// One GSF1 iteration: Z update, then theta <- clamp(theta - a Z).
OptimizerState gsf1_step(const OptimizerState& state, Env& env, const ExperimentConfig& config,
                         RunStreams& streams);

/// Dispatches on config.algorithm.
OptimizerState algorithm_step(const OptimizerState& state, Env& env,
                              const ExperimentConfig& config, RunStreams& streams);

/// Mean cost over `window` steps of a fresh copy of `env` run at fixed
/// theta after `warmup` discarded steps, driven by `rng`.
double evaluate_average_cost(const Env& env, const Vector& theta, std::uint64_t warmup,
                             std::uint64_t window, Rng rng);

/// Metrics for the state at one recording point.
MetricRow measure(const OptimizerState& state, const Env& env, const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Run loop and checkpoints
// ---------------------------------------------------------------------------

struct RunOptions {
  /// Write a checkpoint whenever t is a multiple of this (0 = never).
  std::uint64_t checkpoint_every = 0;
  std::filesystem::path checkpoint_path;
  /// Stop (status Interrupted) once the state at this t has been recorded
  /// and checkpointed. Used to simulate a killed process.
  std::optional<std::uint64_t> stop_at;
  /// Called after every recorded row.
  std::function<void(const OptimizerState&, const MetricRow&)> on_record;
};

struct Checkpoint {
  std::string config_hash;
  OptimizerState state;
  std::string perturbation_rng;
  std::string environment_rng;
  std::string env_state;
  std::vector<MetricRow> rows;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Runs horizon iterations from the initial state. Environment errors end
/// the run early with status Failed and the rows recorded so far.
RunTrace run(const ExperimentConfig& config, Env& env, const RunOptions& options = {});

/// Continues a run from a checkpoint written by run(). Throws
/// CorruptCheckpoint when the checkpoint belongs to a different config.
RunTrace resume(const ExperimentConfig& config, Env& env,
                const std::filesystem::path& checkpoint_path, const RunOptions& options = {});

}  // namespace sfopt
