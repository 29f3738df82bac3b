#include "core/error.hpp"

namespace mt2ie {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kMalformedReply: return "malformed-reply";
    case ErrorCode::kLogprobsUnsupported: return "logprobs-unsupported";
    case ErrorCode::kScoringUnsupported: return "scoring-unsupported";
    case ErrorCode::kSafetyRefusal: return "safety-refusal";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUndefined: return "undefined";
  }
  return "unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kUndefined); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

}  // namespace mt2ie
