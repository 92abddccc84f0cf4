#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sepcnn {

enum class ErrorCode {
  LengthMismatch,
  BadDistributionParams,
  BadMagic,
  TruncatedPayload,
  RankOutOfRange,
  ChannelMismatch,
  WindowTooLarge,
  ShapeMismatch,
  DegenerateBatch,
  BadConfig,
  BackwardBeforeForward,
  ConfigMismatch,
  NotOneHot,
  NotDistribution,
  NonDeterministicForward,
  NoClassesFound,
  EmptyClass,
  UnsupportedFormat,
  CorruptFile,
  BadTarget,
  BadFraction,
  LabelOutOfRange,
  EmptyMatrix,
  EmptyDataset,
  NumericFailure,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable code. Every failure raised by the
/// library is an Error, so callers can branch on code() instead of parsing
/// messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// what() without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace sepcnn
