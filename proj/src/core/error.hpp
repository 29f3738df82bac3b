#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mt2ie {

enum class ErrorCode {
  kPrecondition,
  kConfig,
  kTransport,
  kTimeout,
  kMalformedReply,
  kLogprobsUnsupported,
  kScoringUnsupported,
  kSafetyRefusal,
  kParse,
  kSchema,
  kIo,
  kUndefined,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> error_code_from_string(std::string_view name);

// Every failure raised by the core carries one of the codes above; the C API
// maps them one-to-one onto mt2ie_status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::kPrecondition, what);
}

}  // namespace mt2ie
