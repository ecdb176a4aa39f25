#include "sfopt/core.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "sfopt/error.hpp"

namespace sfopt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::OrderingViolation: return "OrderingViolation";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::SolveFailure: return "SolveFailure";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::MissingMetric: return "MissingMetric";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::NonPositiveValue: return "NonPositiveValue";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::EnvMismatch: return "EnvMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

double step_size(const StepSchedule& schedule, StepKind which, std::uint64_t t) {
  double multiplier = 0.0;
  double exponent = 0.0;
  switch (which) {
    case StepKind::A:
      multiplier = schedule.a0;
      exponent = schedule.sigma;
      break;
    case StepKind::C:
      multiplier = schedule.c0;
      exponent = schedule.alpha;
      break;
    case StepKind::B:
      if (!schedule.nu) {
        throw Error(ErrorKind::ValidationError,
                    "schedule has no nu; the Hessian step b(t) is undefined");
      }
      multiplier = schedule.b0;
      exponent = *schedule.nu;
      break;
  }
  return multiplier * std::pow(1.0 + static_cast<double>(t), -exponent);
}

namespace {

void require(bool ok, const char* inequality) {
  if (!ok) throw Error(ErrorKind::OrderingViolation, inequality);
}

}  // namespace

void validate_schedule(const StepSchedule& s, TimescaleMode mode) {
  if (mode == TimescaleMode::ThreeTimescale) {
    require(s.nu.has_value(), "nu is required for three-timescale schedules");
    require(0.0 < *s.nu, "0 < nu");
    require(*s.nu < s.alpha, "nu < alpha");
  } else {
    require(0.0 < s.alpha, "0 < alpha");
  }
  require(s.alpha < s.sigma, "alpha < sigma");
  require(s.sigma < 1.0, "sigma < 1");
  require(s.a0 > 0.0, "a0 > 0");
  require(s.c0 > 0.0 && s.c0 <= 1.0, "0 < c0 <= 1");
  if (mode == TimescaleMode::ThreeTimescale) {
    require(s.b0 > 0.0 && s.b0 <= 1.0, "0 < b0 <= 1");
  }
}

// ---------------------------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng Rng::substream(std::uint64_t run_seed, std::uint64_t stream) {
  return Rng(mix_seed(run_seed, stream));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (spare_) {
    const double value = *spare_;
    spare_.reset();
    return value;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_ << ' ' << (spare_ ? format_roundtrip(*spare_) : std::string("-"));
  return out.str();
}

Rng Rng::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  Rng rng(0);
  in >> rng.engine_;
  std::string spare;
  in >> spare;
  if (!in || spare.empty()) {
    throw Error(ErrorKind::CorruptCheckpoint, "malformed rng state");
  }
  if (spare != "-") rng.spare_ = parse_double(spare);
  return rng;
}

PerturbationVector sample_perturbation(Rng& rng, int d) {
  PerturbationVector p{Vector(d)};
  for (int i = 0; i < d; ++i) p.eta[i] = rng.normal();
  return p;
}

// ---------------------------------------------------------------------------

std::string format_roundtrip(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_g17(double value) { return fmt::format("{:.17g}", value); }

double parse_double(std::string_view text) {
  double value = 0.0;
  auto first = text.data();
  auto last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::ParseError,
                fmt::format("not a number: '{}'", text));
  }
  return value;
}

}  // namespace sfopt
