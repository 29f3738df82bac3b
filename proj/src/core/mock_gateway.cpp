#include "core/mock_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "core/text.hpp"

namespace mt2ie {

namespace {

using nlohmann::json;

constexpr std::string_view kScriptedBuiltin = R"json({
  "chat": {
    "rules": [
      {"when": "Category: household", "replies": [
        "Prompt: a wooden table with a bowl of apples",
        "Prompt: a red sofa next to a tall lamp",
        "Prompt: a kitchen counter with a blue kettle"]},
      {"when": "Category: descriptions of people", "replies": [
        "Prompt: a woman in a red coat reading a book",
        "Prompt: a boy riding a bike on a street",
        "Prompt: an old man sitting on a bench with a hat"]},
      {"when": "Category: scenes with animals", "replies": [
        "Prompt: a dog running through a park, chasing a ball",
        "Prompt: a cat sleeping on a green blanket",
        "Prompt: two horses standing in a field"]},
      {"when": "Category: location descriptions", "replies": [
        "Prompt: a small harbor with fishing boats",
        "Prompt: a sandy beach with a white lighthouse",
        "Prompt: a city street with tall buildings"]},
      {"when": "by adding one term", "replies": ["Prompt: {prompt} {next_term}"]},
      {"when": "by adding a few terms", "replies": ["Prompt: {prompt} {next_term} {next_term}"]},
      {"when": "half the amount of terms", "replies": ["Prompt: {prompt_half}"]},
      {"when": "by removing two terms", "replies": ["Prompt: {prompt_minus2}"]},
      {"when": "make more clear and simple", "replies": ["Prompt: {prompt}"]},
      {"when": "Answer yes or no and state nothing else", "replies": ["yes"]},
      {"when": "generate multiple-choice questions", "replies": [
        "Q: Does the image show {prompt}?\nChoices: yes, no\nA: yes\nQ: Is this a photo?\nChoices: yes, no\nA: yes"]},
      {"when": "Answer with one of the choices", "replies": ["yes"]},
      {"when": "Score this image between 0 and 10", "replies": ["7"]}
    ],
    "default": "echo",
    "terms": ["with a bird flying overhead", "and a red ball on the grass",
              "next to a small wooden bench", "under a blue sky",
              "with a yellow kite in the air", "and a person walking on a path"]
  },
  "logprobs": {"mode": "length-decay"},
  "scoring": {"token_logprob": -0.6931471805599453}
})json";

constexpr std::string_view kEchoBuiltin = R"json({"chat": {"default": "echo"}})json";

ErrorCode fault_code(const std::string& name) {
  if (name == "transport") return ErrorCode::kTransport;
  if (name == "timeout") return ErrorCode::kTimeout;
  if (name == "malformed") return ErrorCode::kMalformedReply;
  if (name == "refusal") return ErrorCode::kSafetyRefusal;
  fail(ErrorCode::kConfig, "unknown mock fault kind: " + name);
}

LogprobMap parse_logprob_map(const json& obj) {
  LogprobMap m;
  for (const auto& [k, v] : obj.items()) {
    if (v.is_null()) continue;  // explicit "missing"
    m[k] = v.get<double>();
  }
  return m;
}

LogprobMap yes_no_from_score(double p) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kConfig, "mock score outside [0,1]");
  LogprobMap m;
  if (p > 0.0) m["Yes"] = std::log(p);
  if (p < 1.0) m["No"] = std::log1p(-p);
  return m;
}

std::string last_user_text(const std::vector<ChatTurn>& turns) {
  for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
    if (it->role == Role::kUser) return it->text;
  }
  return turns.back().text;
}

std::string join_words(const std::vector<std::string>& words, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n && i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace

MockScript MockScript::from_json(const json& doc) {
  MockScript s;
  try {
    if (doc.contains("chat")) {
      const auto& chat = doc.at("chat");
      for (const auto& r : chat.value("rules", json::array())) {
        s.rules.push_back({r.at("when").get<std::string>(),
                           r.at("replies").get<std::vector<std::string>>()});
        if (s.rules.back().replies.empty()) fail(ErrorCode::kConfig, "mock rule without replies");
      }
      const auto mode = chat.value("default", std::string("echo"));
      if (mode != "echo" && mode != "none") fail(ErrorCode::kConfig, "unknown mock chat default: " + mode);
      s.echo_by_default = mode == "echo";
      s.terms = chat.value("terms", std::vector<std::string>{});
    }
    if (doc.contains("logprobs")) {
      const auto& lp = doc.at("logprobs");
      s.logprobs_supported = lp.value("supported", true);
      for (const auto& m : lp.value("queue", json::array())) s.logprob_queue.push_back(parse_logprob_map(m));
      for (const auto& p : lp.value("scores", json::array())) s.logprob_queue.push_back(yes_no_from_score(p.get<double>()));
      if (lp.contains("default")) s.logprob_default = parse_logprob_map(lp.at("default"));
      const auto mode = lp.value("mode", std::string());
      if (!mode.empty() && mode != "length-decay") fail(ErrorCode::kConfig, "unknown logprob mode: " + mode);
      s.length_decay = mode == "length-decay";
    }
    if (doc.contains("scoring")) {
      const auto& sc = doc.at("scoring");
      s.scoring_supported = sc.value("supported", true);
      s.token_logprob = sc.value("token_logprob", s.token_logprob);
      if (sc.contains("token_logprobs")) s.token_logprobs = sc.at("token_logprobs").get<std::vector<double>>();
    }
    if (doc.contains("image")) {
      const auto& im = doc.at("image");
      s.refuse_when = im.value("refuse_when", std::vector<std::string>{});
      s.image_size = im.value("size", 8u);
      if (s.image_size == 0 || s.image_size > 512) fail(ErrorCode::kConfig, "mock image size out of range");
    }
    for (const auto& f : doc.value("faults", json::array())) {
      s.faults.push_back({f.at("op").get<std::string>(), f.at("call").get<int>(),
                          fault_code(f.value("error", std::string("transport")))});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("invalid mock script: ") + e.what());
  }
  return s;
}

json MockScript::builtin_json(const std::string& name) {
  if (name == "scripted") return json::parse(kScriptedBuiltin);
  if (name == "echo") return json::parse(kEchoBuiltin);
  fail(ErrorCode::kConfig, "unknown builtin mock script: " + name);
}

MockScript MockScript::load(const std::string& name_or_path) {
  if (name_or_path == "scripted" || name_or_path == "echo") return from_json(builtin_json(name_or_path));
  std::ifstream in(name_or_path);
  if (!in) fail(ErrorCode::kConfig, "mock script not found: " + name_or_path);
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, "mock script " + name_or_path + " is not valid JSON: " + e.what());
  }
}

std::vector<std::string> MockScript::builtin_names() { return {"scripted", "echo"}; }

std::string extract_subject(const std::vector<ChatTurn>& turns) {
  const std::string user = last_user_text(turns);
  if (auto at = user.rfind("Existing prompt:"); at != std::string::npos) {
    auto rest = text::trim(std::string_view(user).substr(at + 16));
    return std::string(text::strip_quotes(rest));
  }
  if (auto at = user.rfind("Image description:"); at != std::string::npos) {
    auto rest = std::string_view(user).substr(at + 18);
    return std::string(text::trim(rest.substr(0, rest.find('\n'))));
  }
  constexpr std::string_view kShow = "Does this figure show ";
  constexpr std::string_view kTail = ". Please answer yes or no.";
  if (auto at = user.find(kShow); at != std::string::npos) {
    auto rest = std::string_view(user).substr(at + kShow.size());
    if (auto end = rest.rfind(kTail); end != std::string_view::npos) rest = rest.substr(0, end);
    return std::string(text::trim(rest));
  }
  return std::string(text::trim(user));
}

MockGateway::MockGateway(ModelEndpoint endpoint, MockScript script)
    : endpoint_(std::move(endpoint)), script_(std::move(script)), rule_hits_(script_.rules.size(), 0) {}

int MockGateway::calls(const std::string& op) const {
  std::lock_guard lock(mu_);
  auto it = op_calls_.find(op);
  return it == op_calls_.end() ? 0 : it->second;
}

void MockGateway::count_and_maybe_fail(const std::string& op) const {
  int n = 0;
  {
    std::lock_guard lock(mu_);
    n = ++op_calls_[op];
  }
  for (const auto& f : script_.faults) {
    if (f.op == op && f.call == n) {
      fail(f.code, "injected " + std::string(to_string(f.code)) + " fault on " + op + " call " + std::to_string(n));
    }
  }
}

std::string MockGateway::render(const std::string& reply, const std::vector<ChatTurn>& turns) const {
  if (reply.find('{') == std::string::npos) return reply;
  const std::string subject = extract_subject(turns);
  const auto words = text::split_ws(subject);
  std::string out = reply;
  auto replace_all = [&out](std::string_view key, const std::function<std::string()>& value) {
    for (auto at = out.find(key); at != std::string::npos; at = out.find(key, at)) {
      const std::string v = value();
      out.replace(at, key.size(), v);
      at += v.size();
    }
  };
  replace_all("{prompt}", [&] { return subject; });
  replace_all("{prompt_half}", [&] { return join_words(words, std::max<std::size_t>(1, (words.size() + 1) / 2)); });
  replace_all("{prompt_minus2}", [&] { return join_words(words, words.size() > 2 ? words.size() - 2 : 1); });
  replace_all("{next_term}", [&] {
    if (script_.terms.empty()) return std::string("with a bird");
    std::lock_guard lock(mu_);
    return script_.terms[term_cursor_++ % script_.terms.size()];
  });
  return out;
}

std::string MockGateway::chat(const std::vector<ChatTurn>& turns, const DecodingParams& /*params*/) const {
  check_chat_args(endpoint_, turns);
  count_and_maybe_fail("chat");
  std::string all;
  for (const auto& t : turns) {
    all += t.text;
    all.push_back('\n');
  }
  for (std::size_t i = 0; i < script_.rules.size(); ++i) {
    const auto& rule = script_.rules[i];
    if (all.find(rule.when) == std::string::npos) continue;
    std::string reply;
    {
      std::lock_guard lock(mu_);
      const auto k = std::min(rule_hits_[i]++, rule.replies.size() - 1);
      reply = rule.replies[k];
    }
    return render(reply, turns);
  }
  if (script_.echo_by_default) return last_user_text(turns);
  fail(ErrorCode::kMalformedReply, "mock has no scripted reply for this request");
}

LogprobMap MockGateway::first_token_logprobs(const std::vector<ChatTurn>& turns,
                                             const std::vector<std::string>& candidates) const {
  check_logprob_args(endpoint_, turns, candidates);
  count_and_maybe_fail("first_token_logprobs");
  if (!script_.logprobs_supported) {
    fail(ErrorCode::kLogprobsUnsupported, "mock endpoint does not expose log-probabilities");
  }
  LogprobMap source;
  bool chosen = false;
  {
    std::lock_guard lock(mu_);
    if (logprob_cursor_ < script_.logprob_queue.size()) {
      source = script_.logprob_queue[logprob_cursor_++];
      chosen = true;
    } else if (script_.logprob_default) {
      source = *script_.logprob_default;
      chosen = true;
    } else if (!script_.logprob_queue.empty() && !script_.length_decay) {
      source = script_.logprob_queue.back();
      chosen = true;
    }
  }
  if (!chosen) {
    if (!script_.length_decay) fail(ErrorCode::kMalformedReply, "mock has no scripted log-probabilities");
    // Deterministic score that falls as the subject grows longer.
    const std::string subject = extract_subject(turns);
    const double words = static_cast<double>(text::split_ws(subject).size());
    const double jitter = static_cast<double>(std::stoul(sha256_hex(subject).substr(0, 8), nullptr, 16)) /
                          4294967295.0;
    const double p = std::clamp(0.97 - 0.015 * words + 0.04 * (jitter - 0.5), 0.02, 0.98);
    source = yes_no_from_score(p);
  }
  LogprobMap out;
  for (const auto& c : candidates) {
    auto it = source.find(c);
    out[c] = it == source.end() ? kMissingLogprob : std::min(0.0, it->second);
  }
  return out;
}

TokenScore MockGateway::token_logprobs_sum(const std::string& /*prefix*/, const std::string& continuation) const {
  check_scoring_args(endpoint_, continuation);
  count_and_maybe_fail("token_logprobs_sum");
  if (!script_.scoring_supported) fail(ErrorCode::kScoringUnsupported, "mock endpoint does not score tokens");
  TokenScore s;
  if (script_.token_logprobs) {
    for (double v : *script_.token_logprobs) s.logprob_sum += v;
    s.token_count = static_cast<int>(script_.token_logprobs->size());
  } else {
    s.token_count = static_cast<int>(text::split_ws(continuation).size());
    s.logprob_sum = script_.token_logprob * s.token_count;
  }
  return s;
}

ImageArtifact MockGateway::generate_image(const std::string& prompt, std::int64_t seed) const {
  check_image_args(endpoint_, prompt);
  count_and_maybe_fail("generate_image");
  for (const auto& r : script_.refuse_when) {
    if (prompt.find(r) != std::string::npos) {
      fail(ErrorCode::kSafetyRefusal, "mock T2I refused the prompt");
    }
  }
  // Pixels come from a SHA-256 stream keyed on (prompt, seed).
  const std::string key = prompt + '\0' + std::to_string(seed);
  const std::size_t n = std::size_t{script_.image_size} * script_.image_size * 3;
  Bytes rgb;
  rgb.reserve(n);
  for (std::uint32_t block = 0; rgb.size() < n; ++block) {
    const std::string hex = sha256_hex(key + '\0' + std::to_string(block));
    for (std::size_t i = 0; i + 1 < hex.size() && rgb.size() < n; i += 2) {
      rgb.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    }
  }
  return ImageArtifact::from_png(encode_png_rgb(script_.image_size, script_.image_size, rgb), prompt);
}

}  // namespace mt2ie
