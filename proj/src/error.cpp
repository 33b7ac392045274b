#include "geoprobe/error.hpp"

namespace geoprobe {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MagicMismatch: return "MagicMismatch";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::UnknownLabelColumn: return "UnknownLabelColumn";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::EmptyLabel: return "EmptyLabel";
    case ErrorCode::InconsistentLabelSpace: return "InconsistentLabelSpace";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotSeparable: return "NotSeparable";
    case ErrorCode::IrreducibleOverlap: return "IrreducibleOverlap";
    case ErrorCode::NotLinear: return "NotLinear";
    case ErrorCode::PairOrderMismatch: return "PairOrderMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::LabelSpaceMismatch: return "LabelSpaceMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
  }
  return "Unknown";
}

}  // namespace geoprobe
