#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmed {

enum class ErrorCode {
  InvalidExponent,
  InvalidParameter,
  InvalidTime,
  InvalidInput,
  StepTooLarge,
  DomainOverflow,
  DomainTooSmall,
  UnsupportedPotential,
  EmptyBoundary,
  BoundaryGap,
  OutOfCylinder,
  Config,
  Parse,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidExponent: return "invalid-exponent";
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::InvalidTime: return "invalid-time";
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::StepTooLarge: return "step-too-large";
    case ErrorCode::DomainOverflow: return "domain-overflow";
    case ErrorCode::DomainTooSmall: return "domain-too-small";
    case ErrorCode::UnsupportedPotential: return "unsupported-potential";
    case ErrorCode::EmptyBoundary: return "empty-boundary";
    case ErrorCode::BoundaryGap: return "boundary-gap";
    case ErrorCode::OutOfCylinder: return "out-of-cylinder";
    case ErrorCode::Config: return "config";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

/// Every failure raised by the library carries a stable code so front ends
/// can map it to a diagnostic without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pmed
