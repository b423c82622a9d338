#pragma once

#include <stdexcept>
#include <string>

namespace tidanse {

enum class ErrorCode {
  DimensionMismatch,
  NotPositiveDefinite,
  NoConvergence,
  Singular,
  SingularT,
  RankTooLarge,
  PlacementFailed,
  DegenerateK,
  Unreachable,
  ConfigInvalid,
  SignalTooShort,
  DanseRequiresFc,
  NonPositiveValue,
  MalformedCsv,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code; every failure path in the
/// library throws this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::SingularT: return "SingularT";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::PlacementFailed: return "PlacementFailed";
    case ErrorCode::DegenerateK: return "DegenerateK";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::DanseRequiresFc: return "DanseRequiresFc";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace tidanse
