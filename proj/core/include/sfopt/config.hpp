#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sfopt/core.hpp"
#include "sfopt/environments.hpp"

namespace sfopt {

enum class Algorithm { GSF1, NSF1, NSF1_DIAG };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view text);

inline bool uses_hessian(Algorithm a) { return a != Algorithm::GSF1; }
inline TimescaleMode timescale_mode(Algorithm a) {
  return uses_hessian(a) ? TimescaleMode::ThreeTimescale : TimescaleMode::TwoTimescale;
}

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::NSF1;
  double beta = 0.05;
  StepSchedule schedule;
  std::uint64_t horizon = 0;
  std::uint64_t burn_in = 0;
  Vector box_lower;
  Vector box_upper;
  double pd_floor = 1e-3;
  std::uint64_t seed = 1;
  /// Extra recording points at multiples of eval_every; 0 keeps only the
  /// geometric grid.
  std::uint64_t eval_every = 0;
  /// Ratio of the geometric recording grid.
  double grid_ratio = 1.15;
  /// Length W of the frozen-parameter evaluation window; 0 disables avg_cost.
  std::uint64_t eval_window = 10'000;
  /// Steps L discarded at the start of each evaluation rollout.
  std::uint64_t rollout_warmup = 400;
  /// Initial parameter; empty means zero (projected into the box).
  Vector theta0;
  /// Hold theta fixed (a(t) treated as 0) while H and Z keep tracking.
  bool freeze_theta = false;
  EnvDescriptor env = ChainEnvSpec{};
};

/// Throws ValidationError naming the violated constraint.
void validate(const ExperimentConfig& config);

/// Canonical TOML rendering; parse_config_text(to_toml(c)) reproduces c.
std::string to_toml(const ExperimentConfig& config);

/// 16 hex digits of FNV-1a over the canonical rendering.
std::string config_hash(const ExperimentConfig& config);

/// Overrides are "section.key=value" strings applied before validation.
ExperimentConfig parse_config_text(std::string_view text,
                                   const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {});

}  // namespace sfopt
