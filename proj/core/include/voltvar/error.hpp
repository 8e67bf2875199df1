#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voltvar {

enum class ErrorCode {
  kCycleDetected,
  kDisconnected,
  kNonPositiveImpedance,
  kDuplicateId,
  kUnknownBus,
  kValidation,
  kRootDegreeNotOne,
  kDimensionMismatch,
  kNoConvergence,
  kNegativeSquaredVoltage,
  kMaxIterations,
  kParse,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace voltvar
