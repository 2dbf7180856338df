#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fewshot {

enum class ErrorCode {
  // data
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  TrailingData,
  LabelOutOfRange,
  NonFiniteValue,
  EmptyClass,
  InvalidKind,
  ParseError,
  RaggedRow,
  IoFailure,
  AllZeroAttention,
  NegativeAttention,
  UnnormalizedDistribution,
  LengthMismatch,
  // config
  InvalidConfig,
  NotEnoughClasses,
  NotEnoughSamplesInClass,
  BatchTooSmall,
  // numeric
  DimensionMismatch,
  NonFiniteCost,
  ZeroRow,
};

enum class ErrorClass { Data, Config, Numeric };

std::string_view error_name(ErrorCode code);
ErrorClass error_class(ErrorCode code);

/// Process exit code for a failure of this class: 2 = data, 3 = config, 4 = numeric.
int exit_code(ErrorClass cls);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fewshot
