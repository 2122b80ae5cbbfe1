#include "tidal/error.hpp"

namespace tidal {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::DegenerateInput: return "degenerate-input";
    case ErrorCode::SingularDesign: return "singular-design";
    case ErrorCode::MissingFeature: return "missing-feature";
    case ErrorCode::InvalidLabel: return "invalid-label";
    case ErrorCode::FoldFailure: return "fold-failure";
    case ErrorCode::DegenerateTraining: return "degenerate-training";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::IoError: return "io-error";
  }
  return "unknown";
}

bool is_input_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParameter:
    case ErrorCode::InvalidInput:
    case ErrorCode::MissingFeature:
    case ErrorCode::InvalidLabel:
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
      return true;
    default:
      return false;
  }
}

}  // namespace tidal
