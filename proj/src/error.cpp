#include "qlan/error.hpp"

namespace qlan {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDensityMatrix: return "InvalidDensityMatrix";
    case ErrorCode::NonHermitianInput: return "NonHermitianInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DegenerateState: return "DegenerateState";
    case ErrorCode::DivisionByZeroAccidentals: return "DivisionByZeroAccidentals";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::InvalidDuration: return "InvalidDuration";
    case ErrorCode::ModelMismatch: return "ModelMismatch";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::UnsortedRecords: return "UnsortedRecords";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::StreamTooShort: return "StreamTooShort";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::ChainNotConverged: return "ChainNotConverged";
    case ErrorCode::ZeroProbabilityProjection: return "ZeroProbabilityProjection";
    case ErrorCode::InsufficientCounts: return "InsufficientCounts";
    case ErrorCode::InvalidAllocation: return "InvalidAllocation";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace qlan
