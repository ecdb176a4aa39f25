#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sfopt {

enum class ErrorKind {
  OrderingViolation,
  NonFinite,
  SolveFailure,
  NoConvergence,
  SingularMatrix,
  DimensionMismatch,
  MissingMetric,
  GridMismatch,
  NonPositiveValue,
  EmptyGrid,
  EnvMismatch,
  CorruptCheckpoint,
  ParseError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (and the CLI exit-code mapping) can dispatch without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace sfopt
