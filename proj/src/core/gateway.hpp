#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/codec.hpp"

namespace mt2ie {

enum class EndpointKind { kMllm, kT2i, kLm };

std::string_view to_string(EndpointKind kind);
EndpointKind endpoint_kind_from_string(std::string_view name);

struct ModelEndpoint {
  EndpointKind kind = EndpointKind::kMllm;
  std::string base_url;                    // live endpoints
  std::string model_id;
  std::optional<std::string> auth_token;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;
  std::chrono::milliseconds retry_backoff{200};  // first delay, doubled per retry
  std::optional<std::string> mock_script;  // builtin name or path; replaces base_url

  bool is_mock() const { return mock_script.has_value(); }
  // Throws Error{kConfig} when the invariants do not hold.
  void validate() const;
};

struct ImageArtifact {
  Bytes bytes;
  std::string format = "png";
  std::string content_hash;
  std::string source_prompt;

  static ImageArtifact from_png(Bytes png, std::string source_prompt);
};

enum class Role { kSystem, kUser, kAssistant };

struct ChatTurn {
  Role role = Role::kUser;
  std::string text;
  const ImageArtifact* image = nullptr;  // non-owning; at most one per turn

  static ChatTurn system(std::string text) { return {Role::kSystem, std::move(text), nullptr}; }
  static ChatTurn user(std::string text, const ImageArtifact* image = nullptr) {
    return {Role::kUser, std::move(text), image};
  }
  static ChatTurn assistant(std::string text) { return {Role::kAssistant, std::move(text), nullptr}; }
};

struct DecodingParams {
  double temperature = 0.3;
  std::optional<int> top_k;
  int max_tokens = 256;
};

// Stands in for log(0) when a requested candidate is absent from the reply.
inline constexpr double kMissingLogprob = -std::numeric_limits<double>::infinity();

using LogprobMap = std::map<std::string, double>;

struct TokenScore {
  double logprob_sum = 0.0;
  int token_count = 0;
};

// Uniform access to model endpoints. Implementations are immutable after
// construction (mocks guard their script cursors internally) and safe to
// share across threads.
class Gateway {
 public:
  virtual ~Gateway() = default;

  virtual const ModelEndpoint& endpoint() const = 0;

  virtual std::string chat(const std::vector<ChatTurn>& turns, const DecodingParams& params) const = 0;

  virtual LogprobMap first_token_logprobs(const std::vector<ChatTurn>& turns,
                                          const std::vector<std::string>& candidates) const = 0;

  virtual TokenScore token_logprobs_sum(const std::string& prefix,
                                        const std::string& continuation) const = 0;

  virtual ImageArtifact generate_image(const std::string& prompt, std::int64_t seed) const = 0;
};

// Builds an HTTP or mock gateway depending on endpoint.mock_script.
std::shared_ptr<const Gateway> make_gateway(const ModelEndpoint& endpoint);

// Shared argument checks so every backend enforces the same preconditions.
void check_chat_args(const ModelEndpoint& ep, const std::vector<ChatTurn>& turns);
void check_logprob_args(const ModelEndpoint& ep, const std::vector<ChatTurn>& turns,
                        const std::vector<std::string>& candidates);
void check_scoring_args(const ModelEndpoint& ep, const std::string& continuation);
void check_image_args(const ModelEndpoint& ep, const std::string& prompt);

}  // namespace mt2ie
