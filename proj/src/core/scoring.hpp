#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/gateway.hpp"

namespace mt2ie::scoring {

enum class Method { kVqaScore, kVqaAccuracy, kDegenerate };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

struct QuestionOutcome {
  std::string question;
  std::string expected;
  bool validated = false;
  std::optional<std::string> given;  // absent when the question was not validated
  bool matched = false;              // reply mapped onto a choice by text match
  bool correct = false;

  bool operator==(const QuestionOutcome&) const = default;
};

// Image-prompt consistency in [0,1]. `detail` lists per-question outcomes
// when method is kVqaAccuracy.
struct ConsistencyScore {
  double value = 0.0;
  Method method = Method::kVqaScore;
  std::vector<QuestionOutcome> detail;

  bool operator==(const ConsistencyScore&) const = default;
};

struct AestheticScore {
  double value = 0.0;  // [0,10]

  bool operator==(const AestheticScore&) const = default;
};

struct McQuestion {
  std::string question;
  std::vector<std::string> choices;  // 2-4 distinct entries
  std::string answer;                // one of choices
  std::string element;               // prompt element the question covers

  bool operator==(const McQuestion&) const = default;
};

struct ParsedQuestions {
  std::vector<McQuestion> questions;
  int warnings = 0;  // malformed blocks dropped
};

// ---- VQAScore ---------------------------------------------------------------

std::string vqascore_question(std::string_view prompt);

// P(yes) / (P(yes) + P(no)) with the yes set {"Yes","yes"} and no set
// {"No","no"}; missing entries contribute nothing. Throws
// Error{kMalformedReply} when neither set has any mass.
double normalized_yes_probability(const LogprobMap& logprobs);

// Falls back to a temperature-0 yes/no answer (method kDegenerate) when the
// endpoint cannot return log-probabilities.
ConsistencyScore vqascore(const Gateway& mllm, const ImageArtifact& image, const std::string& prompt);

// ---- Generated question answering ------------------------------------------

// Splits on "Q:" lines; each block needs "Choices:" and "A:" lines and may
// carry an "Element:" line. Blocks breaking the McQuestion invariants are
// dropped and counted.
ParsedQuestions parse_mcq_block(std::string_view raw);
std::string serialize_mcq(const std::vector<McQuestion>& questions);

ParsedQuestions generate_questions(const Gateway& mllm, const std::string& prompt,
                                   std::string_view template_set = "llava");

bool validate_question(const Gateway& mllm, const std::string& prompt, const McQuestion& q,
                       std::string_view template_set = "llava");

struct Answer {
  std::string choice;
  bool matched = false;
};

// Exact match after normalization, else the choice sharing the longest run
// of consecutive words with the reply (first listed wins ties). With no
// overlap at all the first choice is returned with matched=false.
Answer match_answer(std::string_view reply, const std::vector<std::string>& choices);

Answer answer_question(const Gateway& mllm, const ImageArtifact& image, const McQuestion& q);

// Fraction of validated questions answered correctly.
ConsistencyScore vqa_accuracy(const Gateway& mllm, const ImageArtifact& image, const std::string& prompt,
                              const std::vector<McQuestion>& questions, std::string_view template_set = "llava");

// ---- Aesthetics ------------------------------------------------------------

std::optional<double> first_number(std::string_view text);

AestheticScore aesthetic_score(const Gateway& mllm, const ImageArtifact& image);

// One JSON object per line: {"prompt","question","choices","answer","element"}.
std::string questions_to_jsonl(const std::string& prompt, const std::vector<McQuestion>& questions);

}  // namespace mt2ie::scoring
