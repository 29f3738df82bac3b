#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/gateway.hpp"

namespace mt2ie::prompt {

enum class SeedCategory { kHousehold, kPeople, kAnimals, kLocations };

inline constexpr std::array<SeedCategory, 4> kAllCategories = {
    SeedCategory::kHousehold, SeedCategory::kPeople, SeedCategory::kAnimals, SeedCategory::kLocations};

std::string_view to_string(SeedCategory c);
SeedCategory category_from_string(std::string_view name);
// Topic description handed to the MLLM when generating seeds.
std::string_view category_description(SeedCategory c);

// A prompt in an iteration chain. Index 0 is the seed and has no parent;
// every other prompt records its parent's text.
struct PromptText {
  std::string text;
  int iteration_index = 0;
  std::optional<std::string> parent;

  static PromptText seed(std::string text);
  PromptText child(std::string text) const;

  bool operator==(const PromptText&) const = default;
};

enum class BinId { kHalve, kReduce, kRephrase, kIncrease1, kIncrease2 };

std::string_view to_string(BinId id);
BinId bin_from_string(std::string_view name);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_closed = true;
  bool hi_closed = true;

  bool contains(double x) const;
};

struct ScoreBin {
  BinId id;
  Interval interval;
  std::string_view template_id;

  bool operator==(const ScoreBin& o) const { return id == o.id; }
};

// [0.0,0.2] halve, (0.2,0.4] reduce, (0.4,0.6) rephrase, [0.6,0.8) increase1,
// [0.8,1.0] increase2.
const std::array<ScoreBin, 5>& score_bins();
const ScoreBin& bin(BinId id);

// Throws Error{kPrecondition} when score is outside [0,1] or NaN.
const ScoreBin& select_bin(double score);

inline constexpr std::string_view kReplyMarker = "Prompt:";

// Text after the last "Prompt:" marker: first nonempty line, trimmed, with
// surrounding quotes and trailing periods removed. Throws Error{kParse} when
// the marker is absent or nothing follows it.
std::string parse_prompt_reply(std::string_view raw);

struct Generation {
  PromptText prompt;
  int reasks = 0;
};

struct AdaptiveGeneration {
  PromptText prompt;
  ScoreBin bin;
  int reasks = 0;
};

// Generation requests run at temperature 0.3 with top-k disabled unless the
// caller overrides the decoding parameters.
std::vector<Generation> make_seed_prompts(const Gateway& mllm, SeedCategory category, int count,
                                          const DecodingParams& params = {});

Generation next_prompt_iterative(const Gateway& mllm, const PromptText& prev,
                                 const DecodingParams& params = {});

AdaptiveGeneration next_prompt_adaptive(const Gateway& mllm, const PromptText& prev, double prev_score,
                                        const DecodingParams& params = {});

}  // namespace mt2ie::prompt
