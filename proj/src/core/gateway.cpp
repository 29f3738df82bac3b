#include "core/gateway.hpp"

#include "core/error.hpp"
#include "core/http_gateway.hpp"
#include "core/mock_gateway.hpp"

namespace mt2ie {

std::string_view to_string(EndpointKind kind) {
  switch (kind) {
    case EndpointKind::kMllm: return "mllm";
    case EndpointKind::kT2i: return "t2i";
    case EndpointKind::kLm: return "lm";
  }
  return "mllm";
}

EndpointKind endpoint_kind_from_string(std::string_view name) {
  if (name == "mllm") return EndpointKind::kMllm;
  if (name == "t2i") return EndpointKind::kT2i;
  if (name == "lm") return EndpointKind::kLm;
  fail(ErrorCode::kConfig, "unknown endpoint kind: " + std::string(name));
}

void ModelEndpoint::validate() const {
  if (model_id.empty()) fail(ErrorCode::kConfig, "endpoint model_id is empty");
  if (max_retries < 0) fail(ErrorCode::kConfig, "endpoint max_retries must be >= 0");
  if (timeout.count() <= 0) fail(ErrorCode::kConfig, "endpoint timeout must be positive");
  if (is_mock()) {
    if (mock_script->empty()) fail(ErrorCode::kConfig, "mock endpoint needs a script identifier");
    return;
  }
  parse_base_url(base_url);  // throws on a relative or malformed URL
}

ImageArtifact ImageArtifact::from_png(Bytes png, std::string source_prompt) {
  ImageArtifact img;
  img.content_hash = sha256_hex(png);
  img.bytes = std::move(png);
  img.source_prompt = std::move(source_prompt);
  return img;
}

void check_chat_args(const ModelEndpoint& ep, const std::vector<ChatTurn>& turns) {
  require(ep.kind == EndpointKind::kMllm, "chat requires an mllm endpoint");
  require(!turns.empty(), "chat requires at least one turn");
  for (const auto& t : turns) {
    require(!(t.role == Role::kSystem && t.image), "system turns carry no image");
  }
}

void check_logprob_args(const ModelEndpoint& ep, const std::vector<ChatTurn>& turns,
                        const std::vector<std::string>& candidates) {
  check_chat_args(ep, turns);
  require(!candidates.empty(), "first_token_logprobs requires candidates");
  for (const auto& c : candidates) require(!c.empty(), "empty logprob candidate");
}

void check_scoring_args(const ModelEndpoint& ep, const std::string& continuation) {
  require(ep.kind == EndpointKind::kMllm || ep.kind == EndpointKind::kLm,
          "token scoring requires an mllm or lm endpoint");
  require(continuation.find_first_not_of(" \t\r\n") != std::string::npos,
          "token scoring requires a nonempty continuation");
}

void check_image_args(const ModelEndpoint& ep, const std::string& prompt) {
  require(ep.kind == EndpointKind::kT2i, "generate_image requires a t2i endpoint");
  require(!prompt.empty(), "generate_image requires a nonempty prompt");
}

std::shared_ptr<const Gateway> make_gateway(const ModelEndpoint& endpoint) {
  endpoint.validate();
  if (endpoint.is_mock()) {
    return std::make_shared<MockGateway>(endpoint, MockScript::load(*endpoint.mock_script));
  }
  return std::make_shared<HttpGateway>(endpoint);
}

}  // namespace mt2ie
