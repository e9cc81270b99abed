#pragma once

#include <stdexcept>
#include <string>

namespace cableload {

enum class ErrorCode {
  NonSkewInput,
  DegenerateMatrix,
  InvalidRotation,
  InvalidUnitVector,
  InvalidParams,
  InvalidState,
  IndexOutOfRange,
  SingularMassMatrix,
  SingularSaddle,
  NotStabilizable,
  IllConditioned,
  NotHurwitz,
  AttitudeOutOfChart,
  DegenerateThrust,
  DegenerateHeading,
  InvalidArgument,
  ParseError,
  ValidationError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSkewInput: return "NonSkewInput";
    case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::InvalidUnitVector: return "InvalidUnitVector";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SingularMassMatrix: return "SingularMassMatrix";
    case ErrorCode::SingularSaddle: return "SingularSaddle";
    case ErrorCode::NotStabilizable: return "NotStabilizable";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::NotHurwitz: return "NotHurwitz";
    case ErrorCode::AttitudeOutOfChart: return "AttitudeOutOfChart";
    case ErrorCode::DegenerateThrust: return "DegenerateThrust";
    case ErrorCode::DegenerateHeading: return "DegenerateHeading";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace cableload
