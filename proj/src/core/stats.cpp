#include "core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "core/error.hpp"
#include "core/text.hpp"

namespace mt2ie::stats {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "correlation inputs differ in length");
  require(x.size() >= 2, "correlation requires at least two samples");
}

// Number of tied pairs among runs of equal values in a sorted sequence.
template <typename Eq>
long long tied_pairs(std::size_t n, Eq eq) {
  long long total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && eq(i - 1, i)) {
      ++run;
    } else {
      total += static_cast<long long>(run) * static_cast<long long>(run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

long long merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

std::vector<std::pair<double, double>> align(const RankVector& a, const RankVector& b) {
  require(a.size() == b.size(), "rankings cover different model sets");
  std::vector<std::pair<double, double>> out;
  out.reserve(a.size());
  for (const auto& [id, score] : a.entries()) {
    auto other = b.score_of(id);
    require(other.has_value(), "model '" + id + "' missing from second ranking");
    out.emplace_back(score, *other);
  }
  return out;
}

std::map<std::vector<std::string>, long long> ngram_counts(const std::vector<std::string>& toks, int n) {
  std::map<std::vector<std::string>, long long> out;
  if (static_cast<int>(toks.size()) < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
  return out;
}

ClippedCount clipped(const std::vector<std::string>& cand, const std::vector<std::string>& ref, int n) {
  ClippedCount c;
  const auto ref_counts = ngram_counts(ref, n);
  for (const auto& [gram, count] : ngram_counts(cand, n)) {
    c.total += count;
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) c.matches += std::min(count, it->second);
  }
  return c;
}

double brevity_penalty(long long c, long long r) {
  if (c == 0) return 0.0;
  if (c > r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

}  // namespace

RankVector::RankVector(std::vector<std::pair<std::string, double>> entries) : entries_(std::move(entries)) {
  std::set<std::string> seen;
  std::vector<double> scores;
  for (const auto& [id, score] : entries_) {
    require(seen.insert(id).second, "duplicate model id in ranking: " + id);
    require(std::isfinite(score), "non-finite score for model " + id);
    scores.push_back(score);
  }
  ranks_ = average_ranks_desc(scores);
}

std::optional<double> RankVector::rank_of(std::string_view id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == id) return ranks_[i];
  }
  return std::nullopt;
}

std::optional<double> RankVector::score_of(std::string_view id) const {
  for (const auto& [k, v] : entries_) {
    if (k == id) return v;
  }
  return std::nullopt;
}

std::vector<double> average_ranks_desc(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::string_view to_string(Statistic s) {
  return s == Statistic::kKendallTau ? "kendall-tau" : "spearman-rho";
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]); });

  const long long n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
  const long long n1 = tied_pairs(n, [&](auto a, auto b) { return x[idx[a]] == x[idx[b]]; });
  const long long n3 =
      tied_pairs(n, [&](auto a, auto b) { return x[idx[a]] == x[idx[b]] && y[idx[a]] == y[idx[b]]; });

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const long long swaps = merge_count(ys, buf, 0, n);
  const long long n2 = tied_pairs(n, [&](auto a, auto b) { return ys[a] == ys[b]; });

  const long long num = n0 - n1 - n2 + n3 - 2 * swaps;
  if (n0 == n1 || n0 == n2) fail(ErrorCode::kUndefined, "kendall tau undefined for a constant ranking");
  return static_cast<double>(num) / std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::kUndefined, "correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = average_ranks_desc(x);
  const auto ry = average_ranks_desc(y);
  return pearson(rx, ry);
}

CorrelationResult kendall_tau(const RankVector& a, const RankVector& b) {
  const auto pairs = align(a, b);
  std::vector<double> x, y;
  for (const auto& [p, q] : pairs) {
    x.push_back(p);
    y.push_back(q);
  }
  return {Statistic::kKendallTau, kendall_tau_b(x, y), static_cast<int>(x.size())};
}

CorrelationResult spearman_rho(const RankVector& a, const RankVector& b) {
  const auto pairs = align(a, b);
  std::vector<double> x, y;
  for (const auto& [p, q] : pairs) {
    x.push_back(p);
    y.push_back(q);
  }
  return {Statistic::kSpearmanRho, spearman(x, y), static_cast<int>(x.size())};
}

std::vector<std::string> bleu_tokens(std::string_view s) { return text::split_ws(s); }

ClippedCount modified_precision(std::string_view candidate, std::string_view reference, int n) {
  require(n >= 1, "n-gram order must be positive");
  return clipped(bleu_tokens(candidate), bleu_tokens(reference), n);
}

double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references, int max_n) {
  require(!candidates.empty(), "bleu requires candidates");
  require(candidates.size() == references.size(), "bleu requires paired candidates and references");
  require(max_n >= 1, "max n-gram order must be positive");
  std::vector<ClippedCount> totals(max_n);
  long long c_len = 0, r_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto cand = bleu_tokens(candidates[i]);
    const auto ref = bleu_tokens(references[i]);
    c_len += static_cast<long long>(cand.size());
    r_len += static_cast<long long>(ref.size());
    for (int n = 1; n <= max_n; ++n) {
      const auto c = clipped(cand, ref, n);
      totals[n - 1].matches += c.matches;
      totals[n - 1].total += c.total;
    }
  }
  double log_sum = 0.0;
  int orders = 0;
  for (const auto& t : totals) {
    if (t.total == 0) continue;
    if (t.matches == 0) return 0.0;
    log_sum += std::log(static_cast<double>(t.matches) / static_cast<double>(t.total));
    ++orders;
  }
  if (orders == 0) return 0.0;
  return brevity_penalty(c_len, r_len) * std::exp(log_sum / orders);
}

double sentence_bleu(std::string_view candidate, std::string_view reference, int max_n) {
  require(max_n >= 1, "max n-gram order must be positive");
  const auto cand = bleu_tokens(candidate);
  const auto ref = bleu_tokens(reference);
  require(!cand.empty(), "sentence_bleu requires a nonempty candidate");
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto c = clipped(cand, ref, n);
    double p;
    if (n == 1) {
      if (c.matches == 0) return 0.0;
      p = static_cast<double>(c.matches) / static_cast<double>(c.total);
    } else {
      p = static_cast<double>(c.matches + 1) / static_cast<double>(c.total + 1);
    }
    log_sum += std::log(p);
  }
  const auto bp = brevity_penalty(static_cast<long long>(cand.size()), static_cast<long long>(ref.size()));
  return std::clamp(bp * std::exp(log_sum / max_n), 0.0, 1.0);
}

RankVector rank_models(const std::map<std::string, std::vector<double>>& scores) {
  std::vector<std::pair<std::string, double>> entries;
  for (const auto& [id, values] : scores) {
    require(!values.empty(), "model '" + id + "' has no scores");
    entries.emplace_back(id, mean_std(values).mean);
  }
  return RankVector(std::move(entries));
}

MeanStd mean_std(std::span<const double> values) {
  require(!values.empty(), "mean_std requires values");
  const double n = static_cast<double>(values.size());
  MeanStd out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> kNames = {"word_count",      "syllable_count", "avg_syllables_per_word",
                                                  "avg_word_length", "flesch_kincaid", "yngve",
                                                  "perplexity"};
  return kNames;
}

std::optional<double> metric_value(const ling::DifficultyProfile& p, std::string_view metric) {
  if (metric == "word_count") return p.word_count;
  if (metric == "syllable_count") return p.syllable_count;
  if (metric == "avg_syllables_per_word") return p.avg_syllables_per_word;
  if (metric == "avg_word_length") return p.avg_word_length;
  if (metric == "flesch_kincaid") return p.flesch_kincaid;
  if (metric == "yngve") return p.yngve;
  if (metric == "perplexity") return p.perplexity;
  fail(ErrorCode::kPrecondition, "unknown metric: " + std::string(metric));
}

std::vector<MetricCorrelation> metric_score_correlation(const std::vector<ling::DifficultyProfile>& profiles,
                                                        const std::vector<double>& scores) {
  require(profiles.size() == scores.size(), "profiles and scores differ in length");
  require(profiles.size() >= 2, "metric correlation requires at least two samples");
  std::vector<MetricCorrelation> out;
  for (const auto& name : metric_names()) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      if (auto v = metric_value(profiles[i], name)) {
        x.push_back(*v);
        y.push_back(scores[i]);
      }
    }
    if (x.size() < 2) continue;
    try {
      const int n = static_cast<int>(x.size());
      out.push_back({name, {Statistic::kKendallTau, kendall_tau_b(x, y), n},
                     {Statistic::kSpearmanRho, spearman(x, y), n}});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefined) throw;
    }
  }
  return out;
}

QuestionSetComparison compare_question_sets(const std::vector<ElementQuestion>& a,
                                            const std::vector<ElementQuestion>& b) {
  QuestionSetComparison out;
  double sum = 0.0;
  for (const auto& qa : a) {
    std::optional<double> best;
    for (const auto& qb : b) {
      if (text::to_lower(text::trim(qa.element)) != text::to_lower(text::trim(qb.element))) continue;
      if (qa.question.empty()) continue;
      const double s = sentence_bleu(qa.question, qb.question);
      if (!best || s > *best) best = s;
    }
    if (best) {
      sum += *best;
      ++out.matched_elements;
    }
  }
  if (out.matched_elements == 0) fail(ErrorCode::kUndefined, "question sets share no element");
  out.mean_bleu = sum / out.matched_elements;
  return out;
}

}  // namespace mt2ie::stats
