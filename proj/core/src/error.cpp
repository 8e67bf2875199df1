#include "voltvar/error.hpp"

namespace voltvar {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kDisconnected: return "Disconnected";
    case ErrorCode::kNonPositiveImpedance: return "NonPositiveImpedance";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kUnknownBus: return "UnknownBus";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kRootDegreeNotOne: return "RootDegreeNotOne";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kNegativeSquaredVoltage: return "NegativeSquaredVoltage";
    case ErrorCode::kMaxIterations: return "MaxIterations";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace voltvar
