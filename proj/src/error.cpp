#include "xstore/error.hpp"

namespace xstore {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateVersion: return "DuplicateVersion";
    case ErrorCode::kMalformedArchive: return "MalformedArchive";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kInvalidTransition: return "InvalidTransition";
    case ErrorCode::kWrongState: return "WrongState";
    case ErrorCode::kNotRunning: return "NotRunning";
    case ErrorCode::kAlreadyRegistered: return "AlreadyRegistered";
    case ErrorCode::kUnknownEndpoint: return "UnknownEndpoint";
    case ErrorCode::kInvalidMessage: return "InvalidMessage";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidScenario: return "InvalidScenario";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kRouterRegistrationFailed: return "RouterRegistrationFailed";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kCorruptStore: return "CorruptStore";
  }
  return "Unknown";
}

}  // namespace xstore
