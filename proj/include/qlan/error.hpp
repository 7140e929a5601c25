#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qlan {

enum class ErrorCode {
  InvalidArgument,
  InvalidDensityMatrix,
  NonHermitianInput,
  DimensionMismatch,
  IndexOutOfRange,
  DegenerateState,
  DivisionByZeroAccidentals,
  Infeasible,
  InvalidDuration,
  ModelMismatch,
  UnsortedInput,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  UnsortedRecords,
  ResolutionMismatch,
  EmptyHistogram,
  StreamTooShort,
  KeyMismatch,
  ChainNotConverged,
  ZeroProbabilityProjection,
  InsufficientCounts,
  InvalidAllocation,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI, the Python module) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace qlan
