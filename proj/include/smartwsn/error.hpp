#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smartwsn {

enum class ErrorCode {
  AdcOutOfRange,
  Unconvertible,
  InvalidCalibration,
  NonMonotonicTimestamp,
  EmptyGroup,
  IncompleteWindow,
  ParseError,
  IoError,
  EmptyDataset,
  KTooLarge,
  ArityMismatch,
  UnknownAlgorithm,
  InvalidConfig,
  NetworkError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::AdcOutOfRange: return "AdcOutOfRange";
    case ErrorCode::Unconvertible: return "Unconvertible";
    case ErrorCode::InvalidCalibration: return "InvalidCalibration";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::IncompleteWindow: return "IncompleteWindow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::UnknownAlgorithm: return "UnknownAlgorithm";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NetworkError: return "NetworkError";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace smartwsn
