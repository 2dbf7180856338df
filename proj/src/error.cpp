#include "fewshot/error.hpp"

namespace fewshot {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::TrailingData: return "TrailingData";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InvalidKind: return "InvalidKind";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::AllZeroAttention: return "AllZeroAttention";
    case ErrorCode::NegativeAttention: return "NegativeAttention";
    case ErrorCode::UnnormalizedDistribution: return "UnnormalizedDistribution";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NotEnoughClasses: return "NotEnoughClasses";
    case ErrorCode::NotEnoughSamplesInClass: return "NotEnoughSamplesInClass";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteCost: return "NonFiniteCost";
    case ErrorCode::ZeroRow: return "ZeroRow";
  }
  return "Unknown";
}

ErrorClass error_class(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::NotEnoughClasses:
    case ErrorCode::NotEnoughSamplesInClass:
    case ErrorCode::BatchTooSmall:
      return ErrorClass::Config;
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFiniteCost:
    case ErrorCode::ZeroRow:
      return ErrorClass::Numeric;
    default:
      return ErrorClass::Data;
  }
}

int exit_code(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::Data: return 2;
    case ErrorClass::Config: return 3;
    case ErrorClass::Numeric: return 4;
  }
  return 1;
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

}  // namespace fewshot
