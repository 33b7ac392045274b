#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geoprobe {

enum class ErrorCode {
  InvalidArgument,
  Io,
  MagicMismatch,
  CountMismatch,
  NonFiniteValue,
  UnknownLabelColumn,
  IndexOutOfRange,
  EmptySet,
  EmptyLabel,
  InconsistentLabelSpace,
  EmptySeries,
  DimensionMismatch,
  NoConvergence,
  NotSeparable,
  IrreducibleOverlap,
  NotLinear,
  PairOrderMismatch,
  ZeroVariance,
  LabelSpaceMismatch,
  DegenerateInput,
  SingleClass,
  NonFiniteLoss,
  PreconditionFailed,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. The code identifies the contract that
/// was violated; what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace geoprobe
