#include "core/http_gateway.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "core/error.hpp"
#include "core/text.hpp"

namespace mt2ie {

namespace {

using nlohmann::json;

std::string_view role_name(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

bool looks_like_refusal(const std::string& body) {
  const auto lower = text::to_lower(body);
  return lower.find("content_policy") != std::string::npos || lower.find("safety") != std::string::npos ||
         lower.find("nsfw") != std::string::npos;
}

double log_add(double a, double b) {
  if (a == kMissingLogprob) return b;
  if (b == kMissingLogprob) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

BaseUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::kConfig, "base_url is not absolute: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") fail(ErrorCode::kConfig, "base_url scheme must be http or https: " + url);
  const auto host_begin = scheme_end + 3;
  const auto path_begin = url.find('/', host_begin);
  BaseUrl out;
  out.origin = url.substr(0, path_begin);
  if (out.origin.size() <= host_begin) fail(ErrorCode::kConfig, "base_url has no host: " + url);
  if (path_begin != std::string::npos) out.path_prefix = url.substr(path_begin);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

std::string normalize_token(std::string_view token) {
  constexpr std::string_view kSentencePiece = "\xe2\x96\x81";  // U+2581
  constexpr std::string_view kByteLevel = "\xc4\xa0";          // U+0120
  while (true) {
    if (token.starts_with(kSentencePiece)) token.remove_prefix(kSentencePiece.size());
    else if (token.starts_with(kByteLevel)) token.remove_prefix(kByteLevel.size());
    else if (!token.empty() && (token.front() == ' ' || token.front() == '\t' || token.front() == '\n')) token.remove_prefix(1);
    else break;
  }
  return std::string(token);
}

HttpGateway::HttpGateway(ModelEndpoint endpoint)
    : endpoint_(std::move(endpoint)), url_(parse_base_url(endpoint_.base_url)), token_(endpoint_.auth_token) {
  if (const char* env = std::getenv(kAuthTokenEnv); env && *env) token_ = env;
}

json HttpGateway::post(const std::string& path, const json& body) const {
  const std::string payload = body.dump();
  ErrorCode last_code = ErrorCode::kTransport;
  std::string last_msg;
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout);
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(endpoint_.retry_backoff * (1 << (attempt - 1)));
    httplib::Client cli(url_.origin);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                               static_cast<time_t>(timeout.count() % 1000000));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                         static_cast<time_t>(timeout.count() % 1000000));
    cli.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                          static_cast<time_t>(timeout.count() % 1000000));
    httplib::Headers headers;
    if (token_) headers.emplace("Authorization", "Bearer " + *token_);
    const auto started = std::chrono::steady_clock::now();
    auto res = cli.Post(url_.path_prefix + path, headers, payload, "application/json");
    if (!res) {
      const auto elapsed = std::chrono::steady_clock::now() - started;
      const bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                             (res.error() == httplib::Error::Read && elapsed >= endpoint_.timeout);
      last_code = timed_out ? ErrorCode::kTimeout : ErrorCode::kTransport;
      last_msg = "request to " + url_.origin + url_.path_prefix + path + " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_code = ErrorCode::kTransport;
      last_msg = "endpoint returned HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400) {
      if (looks_like_refusal(res->body)) fail(ErrorCode::kSafetyRefusal, "endpoint refused the request: " + res->body);
      fail(ErrorCode::kTransport, "endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kMalformedReply, std::string("endpoint reply is not JSON: ") + e.what());
    }
  }
  fail(last_code, last_msg + " (after " + std::to_string(endpoint_.max_retries + 1) + " attempts)");
}

json HttpGateway::messages(const std::vector<ChatTurn>& turns) const {
  json msgs = json::array();
  for (const auto& t : turns) {
    json m = {{"role", role_name(t.role)}};
    if (t.image) {
      m["content"] = json::array(
          {{{"type", "image_url"},
            {"image_url", {{"url", "data:image/" + t.image->format + ";base64," + base64_encode(t.image->bytes)}}}},
           {{"type", "text"}, {"text", t.text}}});
    } else {
      m["content"] = t.text;
    }
    msgs.push_back(std::move(m));
  }
  return msgs;
}

std::string HttpGateway::chat(const std::vector<ChatTurn>& turns, const DecodingParams& params) const {
  check_chat_args(endpoint_, turns);
  json body = {{"model", endpoint_.model_id},
               {"messages", messages(turns)},
               {"temperature", params.temperature},
               {"max_tokens", params.max_tokens}};
  if (params.top_k) body["top_k"] = *params.top_k;
  const json reply = post("/chat/completions", body);
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) fail(ErrorCode::kMalformedReply, "chat reply content is not text");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedReply, std::string("unexpected chat reply shape: ") + e.what());
  }
}

LogprobMap HttpGateway::first_token_logprobs(const std::vector<ChatTurn>& turns,
                                             const std::vector<std::string>& candidates) const {
  check_logprob_args(endpoint_, turns, candidates);
  json body = {{"model", endpoint_.model_id}, {"messages", messages(turns)}, {"temperature", 0.0},
               {"max_tokens", 1},           {"logprobs", true},             {"top_logprobs", 20}};
  const json reply = post("/chat/completions", body);
  LogprobMap seen;
  try {
    const auto& choice = reply.at("choices").at(0);
    if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
      fail(ErrorCode::kLogprobsUnsupported, "endpoint did not return log-probabilities");
    }
    const auto& first = choice.at("logprobs").at("content").at(0);
    auto fold = [&seen](const json& entry) {
      const auto tok = normalize_token(entry.at("token").get<std::string>());
      const double lp = std::min(0.0, entry.at("logprob").get<double>());
      auto [it, inserted] = seen.emplace(tok, lp);
      if (!inserted) it->second = std::min(0.0, log_add(it->second, lp));
    };
    if (first.contains("top_logprobs") && first.at("top_logprobs").is_array() && !first.at("top_logprobs").empty()) {
      for (const auto& e : first.at("top_logprobs")) fold(e);
    } else {
      fold(first);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedReply, std::string("unexpected logprob reply shape: ") + e.what());
  }
  LogprobMap out;
  for (const auto& c : candidates) {
    auto it = seen.find(c);
    out[c] = it == seen.end() ? kMissingLogprob : it->second;
  }
  return out;
}

TokenScore HttpGateway::token_logprobs_sum(const std::string& prefix, const std::string& continuation) const {
  check_scoring_args(endpoint_, continuation);
  const std::string joined = prefix.empty() ? continuation : prefix + " " + continuation;
  json body = {{"model", endpoint_.model_id}, {"prompt", joined}, {"max_tokens", 0},
               {"echo", true},                 {"logprobs", 1},    {"temperature", 0.0}};
  const json reply = post("/completions", body);
  TokenScore out;
  try {
    const auto& choice = reply.at("choices").at(0);
    if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
      fail(ErrorCode::kScoringUnsupported, "endpoint did not return token log-probabilities");
    }
    const auto& lp = choice.at("logprobs");
    const auto& values = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    if (values.size() != offsets.size()) fail(ErrorCode::kMalformedReply, "token_logprobs/text_offset length mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (offsets[i].get<std::size_t>() < prefix.size() || values[i].is_null()) continue;
      out.logprob_sum += std::min(0.0, values[i].get<double>());
      ++out.token_count;
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedReply, std::string("unexpected scoring reply shape: ") + e.what());
  }
  if (out.token_count == 0) fail(ErrorCode::kMalformedReply, "endpoint scored no continuation tokens");
  return out;
}

ImageArtifact HttpGateway::generate_image(const std::string& prompt, std::int64_t seed) const {
  check_image_args(endpoint_, prompt);
  json body = {{"model", endpoint_.model_id}, {"prompt", prompt}, {"n", 1}, {"seed", seed},
               {"response_format", "b64_json"}};
  const json reply = post("/images/generations", body);
  std::string b64;
  try {
    if (reply.contains("error")) {
      const auto msg = reply.at("error").dump();
      if (looks_like_refusal(msg)) fail(ErrorCode::kSafetyRefusal, "endpoint refused the prompt: " + msg);
      fail(ErrorCode::kMalformedReply, "image endpoint returned an error: " + msg);
    }
    b64 = reply.at("data").at(0).at("b64_json").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedReply, std::string("unexpected image reply shape: ") + e.what());
  }
  Bytes png = base64_decode(b64);
  try {
    inspect_png(png);
  } catch (const Error& e) {
    fail(ErrorCode::kMalformedReply, std::string("image endpoint returned an invalid PNG: ") + e.what());
  }
  return ImageArtifact::from_png(std::move(png), prompt);
}

}  // namespace mt2ie
