#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srrn {

enum class ErrorCode {
  file_not_found,
  decode_failed,
  channel_mismatch,
  invalid_label,
  dimension_mismatch,
  invalid_argument,
  invalid_config,
  empty_input,
  io_failure,
  non_finite,
  checkpoint_mismatch,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code.
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

}  // namespace srrn
