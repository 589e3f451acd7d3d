#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pinchflow {

enum class ErrorCode {
  ZeroMeanCurvature,
  InvalidData,
  InvalidParams,
  DimensionTooSmall,
  NotPinched,
  NotCodazzi,
  InfeasibleParams,
  UnknownProperty,
  BadSpec,
  TimeBeyondSingularity,
  BadResolution,
  DegenerateMetric,
  StepTooSmall,
  EmptySchedule,
  InsufficientData,
  UsageError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroMeanCurvature: return "ZeroMeanCurvature";
    case ErrorCode::InvalidData: return "InvalidData";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::NotPinched: return "NotPinched";
    case ErrorCode::NotCodazzi: return "NotCodazzi";
    case ErrorCode::InfeasibleParams: return "InfeasibleParams";
    case ErrorCode::UnknownProperty: return "UnknownProperty";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::TimeBeyondSingularity: return "TimeBeyondSingularity";
    case ErrorCode::BadResolution: return "BadResolution";
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::StepTooSmall: return "StepTooSmall";
    case ErrorCode::EmptySchedule: return "EmptySchedule";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pinchflow
