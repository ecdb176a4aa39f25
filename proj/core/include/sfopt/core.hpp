#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace sfopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Step-size schedules
// ---------------------------------------------------------------------------

/// Which of the three power-law sequences to evaluate.
///   A: parameter step a(t) = a0 (1+t)^-sigma   (slowest)
///   C: gradient step  c(t) = c0 (1+t)^-alpha   (intermediate)
///   B: Hessian step   b(t) = b0 (1+t)^-nu      (fastest)
enum class StepKind { A, B, C };

enum class TimescaleMode { TwoTimescale, ThreeTimescale };

struct StepSchedule {
  double sigma = 0.6;
  double alpha = 0.4;
  std::optional<double> nu;  // absent for two-timescale (GSF1) runs
  double a0 = 1.0;
  double b0 = 1.0;
  double c0 = 1.0;
};

/// multiplier * (1+t)^-exponent. Requesting B from a schedule without nu
/// throws ValidationError.
double step_size(const StepSchedule& schedule, StepKind which, std::uint64_t t);

/// Throws Error(OrderingViolation) naming the first violated inequality.
void validate_schedule(const StepSchedule& schedule, TimescaleMode mode);

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// Deterministic generator: mt19937_64 for raw bits, uniforms built from
/// the top 53 bits, normals from the Box-Muller transform (both outputs of
/// each pair are used; the cached second value is part of the state).
/// This transform is fixed so streams are reproducible across toolchains,
/// which std::normal_distribution does not guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent sub-stream `stream` of run seed `run_seed`
  /// (engine seeded with splitmix64(run_seed, stream)).
  static Rng substream(std::uint64_t run_seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal.
  double normal();

  std::string serialize() const;
  static Rng deserialize(std::string_view text);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.spare_ == b.spare_;
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Sub-stream indices derived from the run seed.
inline constexpr std::uint64_t kPerturbationStream = 0;
inline constexpr std::uint64_t kEnvironmentStream = 1;
inline constexpr std::uint64_t kEvaluationStream = 2;

/// The two streams a run advances. Evaluation rollouts use a third stream
/// that is re-created for every evaluation and is therefore not stored.
struct RunStreams {
  Rng perturbation;
  Rng environment;

  static RunStreams from_seed(std::uint64_t seed) {
    return {Rng::substream(seed, kPerturbationStream),
            Rng::substream(seed, kEnvironmentStream)};
  }
};

struct PerturbationVector {
  Vector eta;
};

/// d iid N(0,1) draws.
PerturbationVector sample_perturbation(Rng& rng, int d);

// ---------------------------------------------------------------------------
// Small formatting helpers shared by CSV, checkpoint and config hashing.
// ---------------------------------------------------------------------------

/// Shortest decimal text that round-trips to the same double.
std::string format_roundtrip(double value);
/// "%.17g" formatting used for CSV fields.
std::string format_g17(double value);
/// Parses text produced by either formatter; throws ParseError.
double parse_double(std::string_view text);

}  // namespace sfopt
