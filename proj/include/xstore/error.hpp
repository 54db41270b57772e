#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xstore {

// Every failure raised by the store, router, runtime or simulator carries one
// of these codes. The gateway maps each code to exactly one HTTP status.
enum class ErrorCode {
  kDuplicateVersion,
  kMalformedArchive,
  kUnknownId,
  kInvalidTransition,
  kWrongState,
  kNotRunning,
  kAlreadyRegistered,
  kUnknownEndpoint,
  kInvalidMessage,
  kParseError,
  kInvalidScenario,
  kInvalidArgument,
  kRouterRegistrationFailed,
  kIoFailure,
  kCorruptStore,
};

inline constexpr ErrorCode kAllErrorCodes[] = {
    ErrorCode::kDuplicateVersion,  ErrorCode::kMalformedArchive,
    ErrorCode::kUnknownId,         ErrorCode::kInvalidTransition,
    ErrorCode::kWrongState,        ErrorCode::kNotRunning,
    ErrorCode::kAlreadyRegistered, ErrorCode::kUnknownEndpoint,
    ErrorCode::kInvalidMessage,    ErrorCode::kParseError,
    ErrorCode::kInvalidScenario,   ErrorCode::kInvalidArgument,
    ErrorCode::kRouterRegistrationFailed,
    ErrorCode::kIoFailure,         ErrorCode::kCorruptStore,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace xstore
