#include "core/scoring.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <regex>

#include <json.hpp>

#include "core/error.hpp"
#include "core/templates.hpp"
#include "core/text.hpp"

namespace mt2ie::scoring {

namespace {

DecodingParams judge_params() {
  DecodingParams p;
  p.temperature = 0.0;
  return p;
}

// Lowercase, punctuation to spaces, single-spaced.
std::string normalize(std::string_view s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      if (space && !out.empty()) out.push_back(' ');
      out.push_back(static_cast<char>(std::tolower(c)));
      space = false;
    } else {
      space = true;
    }
  }
  return out;
}

std::size_t longest_common_word_run(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t best = 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

std::string replace_once(std::string s, std::string_view key, std::string_view value) {
  if (auto at = s.find(key); at != std::string::npos) s.replace(at, key.size(), value);
  return s;
}

bool is_yes_no(std::string_view answer) {
  const auto n = normalize(answer);
  return n == "yes" || n == "no";
}

std::string derive_element(const std::string& question, const std::string& answer) {
  if (!is_yes_no(answer)) return answer;
  std::string_view q = text::trim(question);
  while (!q.empty() && q.back() == '?') q.remove_suffix(1);
  q = text::trim(q);
  for (std::string_view lead : {"is there ", "are there ", "is this ", "is the ", "are the ", "is it ",
                                "does the image show ", "does this image show "}) {
    if (text::starts_with_ci(q, lead)) {
      q.remove_prefix(lead.size());
      break;
    }
  }
  for (std::string_view tail : {" in the image", " in this image"}) {
    if (q.size() > tail.size() && text::to_lower(q.substr(q.size() - tail.size())) == tail) {
      q.remove_suffix(tail.size());
      break;
    }
  }
  q = text::trim(q);
  return q.empty() ? std::string(text::trim(question)) : std::string(q);
}

std::optional<McQuestion> build_question(const std::string& question, const std::optional<std::string>& choices_line,
                                         const std::optional<std::string>& answer_line,
                                         const std::optional<std::string>& element_line) {
  if (question.empty() || !choices_line || !answer_line) return std::nullopt;
  McQuestion q;
  q.question = question;
  std::string_view rest = *choices_line;
  while (true) {
    const auto comma = rest.find(',');
    const auto piece = text::trim(rest.substr(0, comma));
    if (piece.empty()) return std::nullopt;
    q.choices.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (q.choices.size() < 2 || q.choices.size() > 4) return std::nullopt;
  for (std::size_t i = 0; i < q.choices.size(); ++i) {
    for (std::size_t j = i + 1; j < q.choices.size(); ++j) {
      if (normalize(q.choices[i]) == normalize(q.choices[j])) return std::nullopt;
    }
  }
  const auto want = normalize(*answer_line);
  auto it = std::find_if(q.choices.begin(), q.choices.end(), [&](const auto& c) { return normalize(c) == want; });
  if (it == q.choices.end()) return std::nullopt;
  q.answer = *it;
  q.element = element_line && !element_line->empty() ? *element_line : derive_element(q.question, q.answer);
  return q;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kVqaScore: return "vqascore";
    case Method::kVqaAccuracy: return "vqa-accuracy";
    case Method::kDegenerate: return "degenerate";
  }
  return "vqascore";
}

Method method_from_string(std::string_view name) {
  if (name == "vqascore") return Method::kVqaScore;
  if (name == "vqa-accuracy") return Method::kVqaAccuracy;
  if (name == "degenerate") return Method::kDegenerate;
  fail(ErrorCode::kParse, "unknown scoring method: " + std::string(name));
}

std::string vqascore_question(std::string_view prompt) {
  return "Does this figure show " + std::string(prompt) + ". Please answer yes or no.";
}

double normalized_yes_probability(const LogprobMap& logprobs) {
  static const std::array<std::string_view, 2> kYes = {"Yes", "yes"};
  static const std::array<std::string_view, 2> kNo = {"No", "no"};
  double top = kMissingLogprob;
  for (const auto& [tok, lp] : logprobs) {
    if (std::isfinite(lp)) top = std::max(top, lp);
  }
  if (!std::isfinite(top)) fail(ErrorCode::kMalformedReply, "no yes/no log-probability mass");
  auto mass = [&](const auto& keys) {
    double sum = 0.0;
    for (auto k : keys) {
      auto it = logprobs.find(std::string(k));
      if (it != logprobs.end() && std::isfinite(it->second)) sum += std::exp(it->second - top);
    }
    return sum;
  };
  const double yes = mass(kYes);
  const double no = mass(kNo);
  if (yes + no <= 0.0) fail(ErrorCode::kMalformedReply, "no yes/no log-probability mass");
  return yes / (yes + no);
}

ConsistencyScore vqascore(const Gateway& mllm, const ImageArtifact& image, const std::string& prompt) {
  require(!text::trim(prompt).empty(), "vqascore requires a nonempty prompt");
  const std::vector<ChatTurn> turns = {ChatTurn::user(vqascore_question(prompt), &image)};
  try {
    const auto lp = mllm.first_token_logprobs(turns, {"Yes", "yes", "No", "no"});
    return {std::clamp(normalized_yes_probability(lp), 0.0, 1.0), Method::kVqaScore, {}};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kLogprobsUnsupported) throw;
  }
  const auto reply = text::to_lower(text::trim(mllm.chat(turns, judge_params())));
  if (reply.starts_with("yes")) return {1.0, Method::kDegenerate, {}};
  if (reply.starts_with("no")) return {0.0, Method::kDegenerate, {}};
  fail(ErrorCode::kMalformedReply, "judge reply is neither yes nor no: " + reply);
}

ParsedQuestions parse_mcq_block(std::string_view raw) {
  ParsedQuestions out;
  std::string question;
  std::optional<std::string> choices, answer, element;
  bool open = false;
  auto flush = [&] {
    if (!open) return;
    if (auto q = build_question(question, choices, answer, element)) {
      out.questions.push_back(std::move(*q));
    } else {
      ++out.warnings;
    }
    question.clear();
    choices.reset();
    answer.reset();
    element.reset();
  };
  for (const auto& line_raw : text::split_lines(raw)) {
    const auto line = text::trim(line_raw);
    if (line.starts_with("Q:")) {
      flush();
      open = true;
      question = std::string(text::trim(line.substr(2)));
    } else if (!open) {
      continue;
    } else if (line.starts_with("Choices:")) {
      choices = std::string(text::trim(line.substr(8)));
    } else if (line.starts_with("A:")) {
      answer = std::string(text::trim(line.substr(2)));
    } else if (line.starts_with("Element:")) {
      element = std::string(text::trim(line.substr(8)));
    }
  }
  flush();
  return out;
}

std::string serialize_mcq(const std::vector<McQuestion>& questions) {
  std::string out;
  for (const auto& q : questions) {
    out += "Q: " + q.question + "\nChoices: ";
    for (std::size_t i = 0; i < q.choices.size(); ++i) {
      if (i) out += ", ";
      out += q.choices[i];
    }
    out += "\nA: " + q.answer + "\nElement: " + q.element + "\n";
  }
  return out;
}

ParsedQuestions generate_questions(const Gateway& mllm, const std::string& prompt, std::string_view template_set) {
  require(!text::trim(prompt).empty(), "question generation requires a nonempty prompt");
  const auto set = templates::question_set(template_set);
  const std::string reply = mllm.chat(
      {ChatTurn::system(std::string(templates::text(set.generate))), ChatTurn::user("Image description: " + prompt)},
      judge_params());
  auto parsed = parse_mcq_block(reply);
  if (parsed.questions.empty()) fail(ErrorCode::kParse, "no parseable questions in MLLM reply");
  return parsed;
}

bool validate_question(const Gateway& mllm, const std::string& prompt, const McQuestion& q,
                       std::string_view template_set) {
  const auto set = templates::question_set(template_set);
  std::string body(templates::text(set.validate));
  body = replace_once(std::move(body), "(prompt)", prompt);
  body = replace_once(std::move(body), "(question)", q.question);
  const auto reply = text::to_lower(text::trim(mllm.chat({ChatTurn::user(body)}, judge_params())));
  return reply.starts_with("yes");
}

Answer match_answer(std::string_view reply, const std::vector<std::string>& choices) {
  require(!choices.empty(), "answer matching needs choices");
  const auto norm_reply = normalize(reply);
  for (const auto& c : choices) {
    if (normalize(c) == norm_reply) return {c, true};
  }
  const auto reply_words = text::split_ws(norm_reply);
  std::size_t best = 0;
  const std::string* pick = &choices.front();
  for (const auto& c : choices) {
    const auto run = longest_common_word_run(reply_words, text::split_ws(normalize(c)));
    if (run > best) {
      best = run;
      pick = &c;
    }
  }
  return {*pick, best > 0};
}

Answer answer_question(const Gateway& mllm, const ImageArtifact& image, const McQuestion& q) {
  std::string body = "Question: " + q.question + "\nChoices: ";
  for (std::size_t i = 0; i < q.choices.size(); ++i) {
    if (i) body += ", ";
    body += q.choices[i];
  }
  body += "\nAnswer with one of the choices and state nothing else.";
  return match_answer(mllm.chat({ChatTurn::user(body, &image)}, judge_params()), q.choices);
}

ConsistencyScore vqa_accuracy(const Gateway& mllm, const ImageArtifact& image, const std::string& prompt,
                              const std::vector<McQuestion>& questions, std::string_view template_set) {
  require(!questions.empty(), "vqa_accuracy requires questions");
  ConsistencyScore out{0.0, Method::kVqaAccuracy, {}};
  int validated = 0;
  int correct = 0;
  for (const auto& q : questions) {
    QuestionOutcome o;
    o.question = q.question;
    o.expected = q.answer;
    o.validated = validate_question(mllm, prompt, q, template_set);
    if (o.validated) {
      ++validated;
      const auto a = answer_question(mllm, image, q);
      o.given = a.choice;
      o.matched = a.matched;
      o.correct = a.choice == q.answer;
      correct += o.correct ? 1 : 0;
    }
    out.detail.push_back(std::move(o));
  }
  if (validated == 0) fail(ErrorCode::kUndefined, "no generated question passed validation");
  out.value = static_cast<double>(correct) / static_cast<double>(validated);
  return out;
}

std::optional<double> first_number(std::string_view s) {
  static const std::regex kNumber(R"([-+]?(\d+(\.\d+)?|\.\d+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(s.begin(), s.end(), m, kNumber)) return std::nullopt;
  return std::stod(m.str());
}

AestheticScore aesthetic_score(const Gateway& mllm, const ImageArtifact& image) {
  std::string user(templates::text(templates::kAestheticUser));
  if (auto at = user.find(" (image)"); at != std::string::npos) user.erase(at);
  std::vector<ChatTurn> turns = {ChatTurn::system(std::string(templates::text(templates::kAestheticSystem))),
                                 ChatTurn::user(user, &image)};
  std::string reply = mllm.chat(turns, judge_params());
  auto value = first_number(reply);
  if (!value) {
    turns.push_back(ChatTurn::assistant(reply));
    turns.push_back(ChatTurn::user("State the score as a number between 0 and 10 and nothing else."));
    reply = mllm.chat(turns, judge_params());
    value = first_number(reply);
  }
  if (!value) fail(ErrorCode::kParse, "aesthetic reply has no numeric score after one re-ask");
  return {std::clamp(*value, 0.0, 10.0)};
}

std::string questions_to_jsonl(const std::string& prompt, const std::vector<McQuestion>& questions) {
  std::string out;
  for (const auto& q : questions) {
    nlohmann::json j = {{"prompt", prompt}, {"question", q.question}, {"choices", q.choices},
                        {"answer", q.answer}, {"element", q.element}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace mt2ie::scoring
