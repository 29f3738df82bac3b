#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/gateway.hpp"

namespace mt2ie::ling {

// Conditioning context placed before a prompt when measuring perplexity.
inline constexpr std::string_view kPerplexityPrefix = "There's an image of a";

// Vowel-group heuristic with silent-e, consonant+"le", -ed/-es and hiatus
// adjustments; minimum 1. Words that are not alphabetic after stripping
// punctuation count as 1 and append a message to `warnings` when given.
// Hyphenated compounds are the sum of their parts.
int count_syllables(std::string_view word, std::vector<std::string>* warnings = nullptr);

// Whitespace split, then leading/trailing punctuation stripped; tokens left
// empty are dropped.
std::vector<std::string> words(std::string_view text);

struct TextCounts {
  int words = 0;
  int sentences = 0;
  int syllables = 0;
  int letters = 0;
};

// Sentences are runs of . ! ? followed by whitespace or end of text, plus one
// for trailing words after the last terminator; at least 1.
TextCounts count_text(std::string_view text, std::vector<std::string>* warnings = nullptr);

// Throws Error{kPrecondition} when the text has no words.
double flesch_kincaid(std::string_view text);

struct ConstituencyTree {
  std::string label;  // empty for bare-token leaves
  std::vector<ConstituencyTree> children;
  std::optional<std::string> leaf_token;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const ConstituencyTree&) const = default;

  static ConstituencyTree leaf(std::string token, std::string label = {});
  static ConstituencyTree node(std::string label, std::vector<ConstituencyTree> children);
};

// Throws Error{kSchema} on the first node violating the leaf invariant.
void validate_tree(const ConstituencyTree& tree);
std::vector<std::string> leaves(const ConstituencyTree& tree);

// Penn-style bracketing. Leaves are "(POS token)" or bare tokens; a lone bare
// token is a one-leaf tree. Throws Error{kParse}.
ConstituencyTree parse_bracketed_tree(std::string_view text);
std::string to_bracketed(const ConstituencyTree& tree);

// Mean over leaves of the right-sibling counts summed along the root path.
double yngve_score(const ConstituencyTree& tree);

// Right-branching binary tree; interior nodes labeled "X", bare-token leaves.
ConstituencyTree fallback_tree(const std::vector<std::string>& tokens);

// exp(-mean continuation logprob) given kPerplexityPrefix.
double perplexity(const Gateway& lm, const std::string& text);

struct DifficultyProfile {
  int word_count = 0;
  int syllable_count = 0;
  double avg_syllables_per_word = 0.0;
  double avg_word_length = 0.0;
  double flesch_kincaid = 0.0;
  std::optional<double> yngve;
  bool yngve_approximate = false;  // computed over fallback_tree
  std::optional<double> perplexity;

  bool operator==(const DifficultyProfile&) const = default;
};

// Perplexity is left absent when the endpoint cannot score tokens.
DifficultyProfile difficulty_profile(std::string_view text, const ConstituencyTree* tree = nullptr,
                                     const Gateway* lm = nullptr);

// Same, building a fallback tree when `tree` is null.
DifficultyProfile difficulty_profile_with_fallback(std::string_view text, const ConstituencyTree* tree,
                                                   const Gateway* lm);

// Shell-out contract: the command reads one sentence per line on stdin and
// writes one bracketed tree per line on stdout.
class ExternalParser {
 public:
  explicit ExternalParser(std::string command) : command_(std::move(command)) {}
  std::vector<ConstituencyTree> parse(const std::vector<std::string>& sentences) const;
  const std::string& command() const { return command_; }

 private:
  std::string command_;
};

}  // namespace mt2ie::ling
