#pragma once

#include <json.hpp>

#include "core/gateway.hpp"

namespace mt2ie {

inline constexpr const char* kAuthTokenEnv = "MT2IE_AUTH_TOKEN";

struct BaseUrl {
  std::string origin;       // scheme://host[:port]
  std::string path_prefix;  // e.g. "/v1", never ends with '/'
};

// Throws Error{kConfig} unless `url` is an absolute http(s) URL.
BaseUrl parse_base_url(const std::string& url);

// Talks the chat-completions wire shape:
//   POST {base}/chat/completions  messages, optional logprobs/top_logprobs
//   POST {base}/completions       echo + logprobs for continuation scoring
//   POST {base}/images/generations  prompt -> base64 PNG
class HttpGateway final : public Gateway {
 public:
  explicit HttpGateway(ModelEndpoint endpoint);

  const ModelEndpoint& endpoint() const override { return endpoint_; }

  std::string chat(const std::vector<ChatTurn>& turns, const DecodingParams& params) const override;
  LogprobMap first_token_logprobs(const std::vector<ChatTurn>& turns,
                                  const std::vector<std::string>& candidates) const override;
  TokenScore token_logprobs_sum(const std::string& prefix,
                                const std::string& continuation) const override;
  ImageArtifact generate_image(const std::string& prompt, std::int64_t seed) const override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;
  nlohmann::json messages(const std::vector<ChatTurn>& turns) const;

  ModelEndpoint endpoint_;
  BaseUrl url_;
  std::optional<std::string> token_;
};

// Folds tokenizer surface variants (" Yes", "▁Yes", "ĠYes") onto
// the bare candidate text.
std::string normalize_token(std::string_view token);

}  // namespace mt2ie
