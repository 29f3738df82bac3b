#include "core/lingmetrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "core/error.hpp"
#include "core/text.hpp"

namespace mt2ie::ling {

namespace {

bool is_vowel(const std::string& w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return true;
    case 'y': return i > 0;
    default: return false;
  }
}

bool is_consonant(const std::string& w, std::size_t i) { return !is_vowel(w, i); }

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() >= suffix.size() && std::string_view(w).substr(w.size() - suffix.size()) == suffix;
}

int count_alpha(const std::string& w) {
  int groups = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (is_vowel(w, i) && (i == 0 || !is_vowel(w, i - 1))) ++groups;
  }
  // Adjacent vowels pronounced separately.
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const char a = w[i], b = w[i + 1];
    const char before = i > 0 ? w[i - 1] : '\0';
    if (a == 'i' && b == 'a' && before != 'c' && before != 't') ++groups;
    else if (a == 'i' && b == 'o' && before != 't' && before != 's' && before != 'c' && before != 'x') ++groups;
    else if (a == 'u' && b == 'a' && before != 'g' && before != 'q') ++groups;
    else if (a == 'i' && b == 'u') ++groups;
  }
  if (w.size() >= 4 && ends_with(w, "ea") && is_consonant(w, w.size() - 3) && is_vowel(w, w.size() - 4)) ++groups;

  const std::size_t n = w.size();
  if (groups > 1 && n >= 2 && w[n - 1] == 'e' && is_consonant(w, n - 2)) {
    const bool consonant_le = n >= 3 && w[n - 2] == 'l' && is_consonant(w, n - 3);
    if (!consonant_le) --groups;
  } else if (groups > 1 && n >= 3 && ends_with(w, "ed") && is_consonant(w, n - 3)) {
    if (w[n - 3] != 't' && w[n - 3] != 'd') --groups;
  } else if (groups > 1 && n >= 3 && ends_with(w, "es") && is_consonant(w, n - 3)) {
    const char c = w[n - 3];
    const bool keeps = std::string_view("sxzcgh").find(c) != std::string_view::npos ||
                       (c == 'l' && n >= 4 && is_consonant(w, n - 4));
    if (!keeps) --groups;
  }
  return std::max(groups, 1);
}

std::string_view strip_punct(std::string_view s) {
  while (!s.empty() && !std::isalnum(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && !std::isalnum(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// ---- bracketed tree parsing ---------------------------------------------------

class TreeParser {
 public:
  explicit TreeParser(std::string_view s) : s_(s) {}

  ConstituencyTree parse_root() {
    skip_ws();
    if (at_end()) fail(ErrorCode::kParse, "empty tree text");
    ConstituencyTree t = peek() == '(' ? parse_node() : ConstituencyTree::leaf(atom());
    skip_ws();
    if (!at_end()) error("trailing text after tree");
    return t;
  }

 private:
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kParse, what + " at offset " + std::to_string(pos_));
  }

  std::string atom() {
    const auto start = pos_;
    while (!at_end() && peek() != '(' && peek() != ')' && !std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
    if (pos_ == start) error("expected token");
    return std::string(s_.substr(start, pos_ - start));
  }

  ConstituencyTree parse_node() {
    ++pos_;  // '('
    skip_ws();
    if (at_end()) error("unbalanced brackets");
    std::string label;
    if (peek() != '(' && peek() != ')') label = atom();
    std::vector<ConstituencyTree> children;
    std::vector<bool> bare;
    while (true) {
      skip_ws();
      if (at_end()) error("unbalanced brackets");
      if (peek() == ')') {
        ++pos_;
        break;
      }
      if (peek() == '(') {
        children.push_back(parse_node());
        bare.push_back(false);
      } else {
        children.push_back(ConstituencyTree::leaf(atom()));
        bare.push_back(true);
      }
    }
    if (children.empty()) error("empty node");
    if (children.size() == 1 && bare[0] && !label.empty()) {
      return ConstituencyTree::leaf(*children[0].leaf_token, std::move(label));
    }
    return ConstituencyTree::node(std::move(label), std::move(children));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

void serialize(const ConstituencyTree& t, std::string& out) {
  if (t.is_leaf()) {
    if (t.label.empty()) {
      out += *t.leaf_token;
    } else {
      out += "(" + t.label + " " + *t.leaf_token + ")";
    }
    return;
  }
  out += "(";
  out += t.label;
  for (const auto& c : t.children) {
    out += " ";
    serialize(c, out);
  }
  out += ")";
}

void collect_depths(const ConstituencyTree& t, int depth, long long& sum, long long& count) {
  if (t.is_leaf()) {
    sum += depth;
    ++count;
    return;
  }
  const int n = static_cast<int>(t.children.size());
  for (int i = 0; i < n; ++i) collect_depths(t.children[i], depth + (n - 1 - i), sum, count);
}

}  // namespace

int count_syllables(std::string_view word, std::vector<std::string>* warnings) {
  const auto stripped = strip_punct(word);
  require(!stripped.empty(), "count_syllables requires a word");
  int total = 0;
  std::string part;
  bool alphabetic = true;
  auto flush = [&] {
    if (!part.empty()) total += count_alpha(part);
    part.clear();
  };
  for (char raw : stripped) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalpha(c)) {
      part.push_back(static_cast<char>(std::tolower(c)));
    } else if (raw == '-') {
      flush();
    } else if (raw != '\'') {
      alphabetic = false;
      break;
    }
  }
  if (!alphabetic) {
    if (warnings) warnings->push_back("non-alphabetic word counted as one syllable: " + std::string(stripped));
    return 1;
  }
  flush();
  return std::max(total, 1);
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& tok : text::split_ws(text)) {
    const auto w = strip_punct(tok);
    if (!w.empty()) out.emplace_back(w);
  }
  return out;
}

TextCounts count_text(std::string_view text, std::vector<std::string>* warnings) {
  TextCounts c;
  for (const auto& w : words(text)) {
    ++c.words;
    c.syllables += count_syllables(w, warnings);
    c.letters += static_cast<int>(w.size());
  }
  bool words_since_terminator = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (is_terminator(ch)) {
      const bool run_end = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
      if (run_end && words_since_terminator) {
        ++c.sentences;
        words_since_terminator = false;
      }
    } else if (std::isalnum(static_cast<unsigned char>(ch))) {
      words_since_terminator = true;
    }
  }
  if (words_since_terminator) ++c.sentences;
  c.sentences = std::max(c.sentences, 1);
  return c;
}

double flesch_kincaid(std::string_view text) {
  const auto c = count_text(text);
  require(c.words > 0, "flesch_kincaid requires at least one word");
  return 0.39 * (static_cast<double>(c.words) / c.sentences) +
         11.8 * (static_cast<double>(c.syllables) / c.words) - 15.59;
}

ConstituencyTree ConstituencyTree::leaf(std::string token, std::string label) {
  return {std::move(label), {}, std::move(token)};
}

ConstituencyTree ConstituencyTree::node(std::string label, std::vector<ConstituencyTree> children) {
  return {std::move(label), std::move(children), std::nullopt};
}

void validate_tree(const ConstituencyTree& tree) {
  if (tree.children.empty() != tree.leaf_token.has_value()) {
    fail(ErrorCode::kSchema, "tree node '" + tree.label + "' must be a leaf with a token or an interior node without one");
  }
  if (tree.leaf_token && tree.leaf_token->empty()) fail(ErrorCode::kSchema, "empty leaf token");
  for (const auto& c : tree.children) validate_tree(c);
}

std::vector<std::string> leaves(const ConstituencyTree& tree) {
  if (tree.is_leaf()) return {tree.leaf_token.value_or("")};
  std::vector<std::string> out;
  for (const auto& c : tree.children) {
    auto sub = leaves(c);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

ConstituencyTree parse_bracketed_tree(std::string_view text) { return TreeParser(text).parse_root(); }

std::string to_bracketed(const ConstituencyTree& tree) {
  std::string out;
  serialize(tree, out);
  return out;
}

double yngve_score(const ConstituencyTree& tree) {
  validate_tree(tree);
  long long sum = 0, count = 0;
  collect_depths(tree, 0, sum, count);
  return static_cast<double>(sum) / static_cast<double>(count);
}

ConstituencyTree fallback_tree(const std::vector<std::string>& tokens) {
  require(!tokens.empty(), "fallback_tree requires at least one token");
  ConstituencyTree t = ConstituencyTree::leaf(tokens.back());
  for (auto i = tokens.size() - 1; i-- > 0;) {
    t = ConstituencyTree::node("X", {ConstituencyTree::leaf(tokens[i]), std::move(t)});
  }
  return t;
}

double perplexity(const Gateway& lm, const std::string& text) {
  require(!text::trim(text).empty(), "perplexity requires nonempty text");
  const auto score = lm.token_logprobs_sum(std::string(kPerplexityPrefix), text);
  if (score.token_count <= 0) fail(ErrorCode::kMalformedReply, "token scoring returned no continuation tokens");
  return std::exp(-score.logprob_sum / score.token_count);
}

DifficultyProfile difficulty_profile(std::string_view text, const ConstituencyTree* tree, const Gateway* lm) {
  const auto c = count_text(text);
  require(c.words > 0, "difficulty_profile requires text with at least one word");
  DifficultyProfile p;
  p.word_count = c.words;
  p.syllable_count = c.syllables;
  p.avg_syllables_per_word = static_cast<double>(c.syllables) / c.words;
  p.avg_word_length = static_cast<double>(c.letters) / c.words;
  p.flesch_kincaid = 0.39 * (static_cast<double>(c.words) / c.sentences) + 11.8 * p.avg_syllables_per_word - 15.59;
  if (tree) p.yngve = yngve_score(*tree);
  if (lm) {
    try {
      p.perplexity = perplexity(*lm, std::string(text));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kScoringUnsupported) throw;
    }
  }
  return p;
}

DifficultyProfile difficulty_profile_with_fallback(std::string_view text, const ConstituencyTree* tree,
                                                   const Gateway* lm) {
  if (tree) return difficulty_profile(text, tree, lm);
  const auto fb = fallback_tree(words(text));
  auto p = difficulty_profile(text, &fb, lm);
  p.yngve_approximate = true;
  return p;
}

std::vector<ConstituencyTree> ExternalParser::parse(const std::vector<std::string>& sentences) const {
  namespace fs = std::filesystem;
  std::random_device rd;
  const auto input = fs::temp_directory_path() / ("mt2ie-parse-" + std::to_string(rd()) + ".txt");
  {
    std::ofstream f(input);
    if (!f) fail(ErrorCode::kIo, "cannot write parser input " + input.string());
    for (const auto& s : sentences) {
      std::string line = s;
      std::replace(line.begin(), line.end(), '\n', ' ');
      f << line << '\n';
    }
  }
  const std::string cmd = command_ + " < '" + input.string() + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    fs::remove(input);
    fail(ErrorCode::kIo, "cannot run parser command: " + command_);
  }
  std::string output;
  char buf[4096];
  while (auto n = std::fread(buf, 1, sizeof buf, pipe)) output.append(buf, n);
  const int status = ::pclose(pipe);
  std::error_code ec;
  fs::remove(input, ec);
  if (status != 0) fail(ErrorCode::kIo, "parser command exited with status " + std::to_string(status));

  std::vector<ConstituencyTree> out;
  for (const auto& line : text::split_lines(output)) {
    if (text::trim(line).empty()) continue;
    out.push_back(parse_bracketed_tree(line));
  }
  if (out.size() != sentences.size()) {
    fail(ErrorCode::kParse, "parser returned " + std::to_string(out.size()) + " trees for " +
                                std::to_string(sentences.size()) + " sentences");
  }
  return out;
}

}  // namespace mt2ie::ling
