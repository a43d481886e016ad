#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lctvnumra {

enum class ErrorCode {
  NotUnimodular,
  DegenerateB,
  EmptyGrid,
  EvenR,
  ROutOfRange,
  NotCoprime,
  NonPositiveN,
  ShiftNotOnLattice,
  BankSizeMismatch,
  ChannelMismatch,
  BadInterval,
  CompletionFailed,
  NotNormalized,
  NonConverged,
  EllOutOfRange,
  CertificationFailed,
  LatticeMismatch,
  SupportOverflow,
  IncompatiblePyramid,
  InvalidArgument,
  ParseError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotUnimodular: return "NotUnimodular";
    case ErrorCode::DegenerateB: return "DegenerateB";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::EvenR: return "EvenR";
    case ErrorCode::ROutOfRange: return "ROutOfRange";
    case ErrorCode::NotCoprime: return "NotCoprime";
    case ErrorCode::NonPositiveN: return "NonPositiveN";
    case ErrorCode::ShiftNotOnLattice: return "ShiftNotOnLattice";
    case ErrorCode::BankSizeMismatch: return "BankSizeMismatch";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::BadInterval: return "BadInterval";
    case ErrorCode::CompletionFailed: return "CompletionFailed";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NonConverged: return "NonConverged";
    case ErrorCode::EllOutOfRange: return "EllOutOfRange";
    case ErrorCode::CertificationFailed: return "CertificationFailed";
    case ErrorCode::LatticeMismatch: return "LatticeMismatch";
    case ErrorCode::SupportOverflow: return "SupportOverflow";
    case ErrorCode::IncompatiblePyramid: return "IncompatiblePyramid";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lctvnumra
