#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nsp {

enum class ErrorCode {
  InvalidNode,
  EmptyGraph,
  ShapeMismatch,
  CapacityExceeded,
  EmptyDistribution,
  InvalidK,
  MissingDualGraphs,
  TapeMismatch,
  EmptyMask,
  NonFiniteGradient,
  InvalidSpec,
  InvalidConfig,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every library failure carries a machine-readable code so the CLI can map
// it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Numerical failures (exit code 3) versus data/usage failures.
inline bool is_numerical(ErrorCode code) noexcept {
  return code == ErrorCode::NonFiniteGradient;
}

}  // namespace nsp
