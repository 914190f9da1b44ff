#include "bilevel/error.hpp"

namespace bilevel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch:
      return "DimensionMismatch";
    case ErrorCode::kNonFiniteValue:
      return "NonFiniteValue";
    case ErrorCode::kIndexOutOfRange:
      return "IndexOutOfRange";
    case ErrorCode::kUpperConstraintUsesY:
      return "UpperConstraintUsesY";
    case ErrorCode::kParseError:
      return "ParseError";
    case ErrorCode::kLayoutMismatch:
      return "LayoutMismatch";
    case ErrorCode::kNotAWdp:
      return "NotAWdp";
    case ErrorCode::kNotAnMpec:
      return "NotAnMpec";
    case ErrorCode::kNotOnDiagonal:
      return "NotOnDiagonal";
    case ErrorCode::kInfeasiblePoint:
      return "InfeasiblePoint";
    case ErrorCode::kInfeasibleInput:
      return "InfeasibleInput";
    case ErrorCode::kLowerLevelInfeasible:
      return "LowerLevelInfeasible";
    case ErrorCode::kSolverFailure:
      return "SolverFailure";
    case ErrorCode::kInvalidArgument:
      return "InvalidArgument";
    case ErrorCode::kIoError:
      return "IoError";
  }
  return "Unknown";
}

}  // namespace bilevel
