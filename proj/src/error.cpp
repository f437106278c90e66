#include "nsp/error.hpp"

namespace nsp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidNode: return "InvalidNode";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::EmptyDistribution: return "EmptyDistribution";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::MissingDualGraphs: return "MissingDualGraphs";
    case ErrorCode::TapeMismatch: return "TapeMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace nsp
