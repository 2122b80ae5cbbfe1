#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tidal {

enum class ErrorCode {
  InvalidParameter,
  InvalidInput,
  InsufficientData,
  DegenerateInput,
  SingularDesign,
  MissingFeature,
  InvalidLabel,
  FoldFailure,
  DegenerateTraining,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Input errors map to exit code 2, analysis errors to exit code 3.
bool is_input_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tidal
