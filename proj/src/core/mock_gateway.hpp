#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/error.hpp"
#include "core/gateway.hpp"

namespace mt2ie {

// Scripted behaviour for a MockGateway. Scripts are JSON documents:
//
//   {
//     "chat":     {"rules": [{"when": "<substring>", "replies": ["..."]}],
//                  "default": "echo" | "none", "terms": ["with a bird", ...]},
//     "logprobs": {"supported": true, "queue": [{"Yes": -0.1, "No": -2.3}],
//                  "scores": [0.9, ...], "default": {...}, "mode": "length-decay"},
//     "scoring":  {"supported": true, "token_logprob": -0.69, "token_logprobs": [...]},
//     "image":    {"refuse_when": ["..."], "size": 8},
//     "faults":   [{"op": "generate_image", "call": 14, "error": "transport"}]
//   }
//
// Chat rules match against the concatenated turn texts; the first matching
// rule answers with its replies in order, repeating the last one once the
// list is exhausted. Replies may use {prompt}, {prompt_half},
// {prompt_minus2} and {next_term} placeholders.
struct MockScript {
  struct ChatRule {
    std::string when;
    std::vector<std::string> replies;
  };
  struct Fault {
    std::string op;
    int call = 0;  // 1-based count of calls to `op`
    ErrorCode code = ErrorCode::kTransport;
  };

  std::vector<ChatRule> rules;
  bool echo_by_default = true;
  std::vector<std::string> terms;

  bool logprobs_supported = true;
  std::vector<LogprobMap> logprob_queue;
  std::optional<LogprobMap> logprob_default;
  bool length_decay = false;

  bool scoring_supported = true;
  double token_logprob = -0.69314718055994530942;
  std::optional<std::vector<double>> token_logprobs;

  std::vector<std::string> refuse_when;
  std::uint32_t image_size = 8;

  std::vector<Fault> faults;

  static MockScript from_json(const nlohmann::json& doc);
  // Accepts a builtin name ("scripted", "echo") or a path to a JSON script.
  static MockScript load(const std::string& name_or_path);
  static std::vector<std::string> builtin_names();
  // JSON source of a builtin script, for callers that extend it.
  static nlohmann::json builtin_json(const std::string& name);
};

// Extracts the subject prompt from a templated request: the quoted text after
// `Existing prompt:`, the text after `Image description:`, the VQAScore
// question body, or else the last user turn.
std::string extract_subject(const std::vector<ChatTurn>& turns);

class MockGateway final : public Gateway {
 public:
  MockGateway(ModelEndpoint endpoint, MockScript script);

  const ModelEndpoint& endpoint() const override { return endpoint_; }

  std::string chat(const std::vector<ChatTurn>& turns, const DecodingParams& params) const override;
  LogprobMap first_token_logprobs(const std::vector<ChatTurn>& turns,
                                  const std::vector<std::string>& candidates) const override;
  TokenScore token_logprobs_sum(const std::string& prefix,
                                const std::string& continuation) const override;
  ImageArtifact generate_image(const std::string& prompt, std::int64_t seed) const override;

  // Number of calls observed per operation name.
  int calls(const std::string& op) const;

 private:
  void count_and_maybe_fail(const std::string& op) const;
  std::string render(const std::string& reply, const std::vector<ChatTurn>& turns) const;

  ModelEndpoint endpoint_;
  MockScript script_;

  mutable std::mutex mu_;
  mutable std::map<std::string, int> op_calls_;
  mutable std::vector<std::size_t> rule_hits_;
  mutable std::size_t logprob_cursor_ = 0;
  mutable std::size_t term_cursor_ = 0;
};

}  // namespace mt2ie
