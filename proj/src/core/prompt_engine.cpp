#include "core/prompt_engine.hpp"

#include <cmath>

#include "core/error.hpp"
#include "core/templates.hpp"
#include "core/text.hpp"

namespace mt2ie::prompt {

namespace {

constexpr std::string_view kReaskText = "Write \"Prompt:\" and write the new prompt, do not state anything else.";

// One automatic re-ask, then a hard parse failure.
std::pair<std::string, int> ask_for_prompt(const Gateway& mllm, std::vector<ChatTurn> turns,
                                           const DecodingParams& params) {
  const std::string first = mllm.chat(turns, params);
  try {
    return {parse_prompt_reply(first), 0};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kParse) throw;
  }
  turns.push_back(ChatTurn::assistant(first));
  turns.push_back(ChatTurn::user(std::string(kReaskText)));
  const std::string second = mllm.chat(turns, params);
  try {
    return {parse_prompt_reply(second), 1};
  } catch (const Error&) {
    fail(ErrorCode::kParse, "MLLM reply lacks the \"Prompt:\" marker after one re-ask");
  }
}

std::string existing_prompt_turn(const PromptText& prev) { return "Existing prompt: \"" + prev.text + "\""; }

}  // namespace

std::string_view to_string(SeedCategory c) {
  switch (c) {
    case SeedCategory::kHousehold: return "household";
    case SeedCategory::kPeople: return "people";
    case SeedCategory::kAnimals: return "animals";
    case SeedCategory::kLocations: return "locations";
  }
  return "household";
}

SeedCategory category_from_string(std::string_view name) {
  for (auto c : kAllCategories) {
    if (to_string(c) == name) return c;
  }
  fail(ErrorCode::kConfig, "unknown seed category: " + std::string(name));
}

std::string_view category_description(SeedCategory c) {
  switch (c) {
    case SeedCategory::kHousehold: return "household scenes (foods, household items, or furniture)";
    case SeedCategory::kPeople: return "descriptions of people";
    case SeedCategory::kAnimals: return "scenes with animals";
    case SeedCategory::kLocations: return "location descriptions";
  }
  return "";
}

PromptText PromptText::seed(std::string text) {
  require(!text::trim(text).empty(), "prompt text must be nonempty");
  return {std::move(text), 0, std::nullopt};
}

PromptText PromptText::child(std::string text) const {
  require(!text::trim(text).empty(), "prompt text must be nonempty");
  return {std::move(text), iteration_index + 1, this->text};
}

std::string_view to_string(BinId id) {
  switch (id) {
    case BinId::kHalve: return "halve";
    case BinId::kReduce: return "reduce";
    case BinId::kRephrase: return "rephrase";
    case BinId::kIncrease1: return "increase1";
    case BinId::kIncrease2: return "increase2";
  }
  return "halve";
}

BinId bin_from_string(std::string_view name) {
  for (const auto& b : score_bins()) {
    if (to_string(b.id) == name) return b.id;
  }
  fail(ErrorCode::kParse, "unknown score bin: " + std::string(name));
}

bool Interval::contains(double x) const {
  const bool above = lo_closed ? x >= lo : x > lo;
  const bool below = hi_closed ? x <= hi : x < hi;
  return above && below;
}

const std::array<ScoreBin, 5>& score_bins() {
  static const std::array<ScoreBin, 5> kBins = {{
      {BinId::kHalve, {0.0, 0.2, true, true}, "adaptive-halve"},
      {BinId::kReduce, {0.2, 0.4, false, true}, "adaptive-reduce"},
      {BinId::kRephrase, {0.4, 0.6, false, false}, "adaptive-rephrase"},
      {BinId::kIncrease1, {0.6, 0.8, true, false}, "adaptive-increase1"},
      {BinId::kIncrease2, {0.8, 1.0, true, true}, "adaptive-increase2"},
  }};
  return kBins;
}

const ScoreBin& bin(BinId id) { return score_bins()[static_cast<std::size_t>(id)]; }

const ScoreBin& select_bin(double score) {
  require(!std::isnan(score) && score >= 0.0 && score <= 1.0, "score must lie in [0,1]");
  for (const auto& b : score_bins()) {
    if (b.interval.contains(score)) return b;
  }
  fail(ErrorCode::kUndefined, "score bins do not cover " + std::to_string(score));
}

std::string parse_prompt_reply(std::string_view raw) {
  const auto at = raw.rfind(kReplyMarker);
  if (at == std::string_view::npos) fail(ErrorCode::kParse, "reply has no \"Prompt:\" marker");
  std::string_view rest = raw.substr(at + kReplyMarker.size());
  std::string first;
  for (const auto& l : text::split_lines(rest)) {
    if (!text::trim(l).empty()) {
      first = std::string(text::trim(l));
      break;
    }
  }
  std::string out(text::strip_quotes(first));
  while (!out.empty() && out.back() == '.') out.pop_back();
  out = std::string(text::strip_quotes(text::trim(out)));
  if (out.empty()) fail(ErrorCode::kParse, "reply has nothing after the \"Prompt:\" marker");
  return out;
}

std::vector<Generation> make_seed_prompts(const Gateway& mllm, SeedCategory category, int count,
                                          const DecodingParams& params) {
  require(count >= 1, "seed count must be >= 1");
  std::vector<Generation> out;
  for (int i = 0; i < count; ++i) {
    std::string user = "Category: " + std::string(category_description(category));
    if (!out.empty()) {
      user += "\nDo not repeat these prompts:";
      for (const auto& g : out) user += "\n- " + g.prompt.text;
    }
    auto [text, reasks] = ask_for_prompt(
        mllm, {ChatTurn::system(std::string(templates::text(templates::kSeed))), ChatTurn::user(user)}, params);
    out.push_back({PromptText::seed(std::move(text)), reasks});
  }
  return out;
}

Generation next_prompt_iterative(const Gateway& mllm, const PromptText& prev, const DecodingParams& params) {
  require(!text::trim(prev.text).empty(), "previous prompt must be nonempty");
  auto [text, reasks] = ask_for_prompt(mllm,
                                       {ChatTurn::system(std::string(templates::text(templates::kIterative))),
                                        ChatTurn::user(existing_prompt_turn(prev))},
                                       params);
  return {prev.child(std::move(text)), reasks};
}

AdaptiveGeneration next_prompt_adaptive(const Gateway& mllm, const PromptText& prev, double prev_score,
                                        const DecodingParams& params) {
  require(!text::trim(prev.text).empty(), "previous prompt must be nonempty");
  const ScoreBin& chosen = select_bin(prev_score);
  auto [text, reasks] = ask_for_prompt(
      mllm,
      {ChatTurn::system(std::string(templates::text(chosen.template_id))), ChatTurn::user(existing_prompt_turn(prev))},
      params);
  return {prev.child(std::move(text)), chosen, reasks};
}

}  // namespace mt2ie::prompt
