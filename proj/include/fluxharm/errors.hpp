#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fluxharm {

// Every recoverable failure in the library throws Error with one of these
// codes. Tests and the CLI dispatch on the code; the message is for humans.
enum class ErrorCode {
  // ingest
  MalformedRow,
  NonUniformSampling,
  EmptySeries,
  TooShort,
  NonFiniteValue,
  QfOutOfRange,
  // embedding
  WindowTooLarge,
  WindowZero,
  ConstantRow,
  ShapeMismatch,
  // decompositions
  SvdFailure,
  KOutOfRange,
  EigFailure,
  ZeroDensity,
  FitFailure,
  DegenerateCurve,
  // spectral / metrics
  InvalidCutoff,
  NoPairs,
  // configuration
  ConfigError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonUniformSampling: return "NonUniformSampling";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::QfOutOfRange: return "QfOutOfRange";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::WindowZero: return "WindowZero";
    case ErrorCode::ConstantRow: return "ConstantRow";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SvdFailure: return "SvdFailure";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::EigFailure: return "EigFailure";
    case ErrorCode::ZeroDensity: return "ZeroDensity";
    case ErrorCode::FitFailure: return "FitFailure";
    case ErrorCode::DegenerateCurve: return "DegenerateCurve";
    case ErrorCode::InvalidCutoff: return "InvalidCutoff";
    case ErrorCode::NoPairs: return "NoPairs";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace fluxharm
