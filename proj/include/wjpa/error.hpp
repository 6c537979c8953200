#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wjpa {

enum class ErrorCode {
  InvalidArgument,
  DivergentInductance,
  OutOfRange,
  StubResonance,
  NoRootInBracket,
  InsufficientSamples,
  NonPositiveSlope,
  FitDiverged,
  InsufficientSpan,
  NoPhysicalRoot,
  UnstableOperatingPoint,
  NoCompressionFound,
  InsufficientPoints,
  NonPositiveGain,
  LowContrast,
  NonlinearStark,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DivergentInductance: return "DivergentInductance";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::StubResonance: return "StubResonance";
    case ErrorCode::NoRootInBracket: return "NoRootInBracket";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NonPositiveSlope: return "NonPositiveSlope";
    case ErrorCode::FitDiverged: return "FitDiverged";
    case ErrorCode::InsufficientSpan: return "InsufficientSpan";
    case ErrorCode::NoPhysicalRoot: return "NoPhysicalRoot";
    case ErrorCode::UnstableOperatingPoint: return "UnstableOperatingPoint";
    case ErrorCode::NoCompressionFound: return "NoCompressionFound";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::NonPositiveGain: return "NonPositiveGain";
    case ErrorCode::LowContrast: return "LowContrast";
    case ErrorCode::NonlinearStark: return "NonlinearStark";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code so the
/// CLI can report it as JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool ok, ErrorCode code, const char* what) {
  if (!ok) throw Error(code, what);
}

template <typename Scalar>
void require_positive(Scalar value, const char* name) {
  if (!(value > Scalar(0))) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be positive");
}

}  // namespace detail
}  // namespace wjpa
