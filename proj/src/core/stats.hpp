#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core/lingmetrics.hpp"

namespace mt2ie::stats {

// Model scores; rank 1 is the highest score, ties share their average rank.
class RankVector {
 public:
  RankVector() = default;
  // Throws Error{kPrecondition} on duplicate ids or non-finite scores.
  explicit RankVector(std::vector<std::pair<std::string, double>> entries);

  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }
  const std::vector<double>& ranks() const { return ranks_; }
  std::size_t size() const { return entries_.size(); }
  std::optional<double> rank_of(std::string_view id) const;
  std::optional<double> score_of(std::string_view id) const;

  bool operator==(const RankVector&) const = default;

 private:
  std::vector<std::pair<std::string, double>> entries_;
  std::vector<double> ranks_;
};

// Average ranks with 1 assigned to the largest value.
std::vector<double> average_ranks_desc(std::span<const double> values);

enum class Statistic { kKendallTau, kSpearmanRho };
std::string_view to_string(Statistic s);

struct CorrelationResult {
  Statistic statistic = Statistic::kKendallTau;
  double value = 0.0;
  int n = 0;
};

// tau-b over paired samples in O(n log n). Throws kPrecondition on length
// mismatch or n < 2 and kUndefined when either side is constant.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks; same errors as kendall_tau_b.
double spearman(std::span<const double> x, std::span<const double> y);
double pearson(std::span<const double> x, std::span<const double> y);

// Pairs entries by model id; throws kPrecondition when the id sets differ.
CorrelationResult kendall_tau(const RankVector& a, const RankVector& b);
CorrelationResult spearman_rho(const RankVector& a, const RankVector& b);

struct ClippedCount {
  long long matches = 0;
  long long total = 0;
};

std::vector<std::string> bleu_tokens(std::string_view s);
// Candidate n-gram counts clipped by their count in the reference.
ClippedCount modified_precision(std::string_view candidate, std::string_view reference, int n);

// Corpus BLEU over paired candidate/reference strings, uniform weights, no
// smoothing. Orders for which the candidates hold no n-grams at all are left
// out of the geometric mean.
double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references, int max_n = 4);
// Sentence BLEU with add-one smoothing on orders above 1.
double sentence_bleu(std::string_view candidate, std::string_view reference, int max_n = 4);

RankVector rank_models(const std::map<std::string, std::vector<double>>& scores);

struct MeanStd {
  double mean = 0.0;
  std::optional<double> std;  // sample std; absent for n = 1
};
MeanStd mean_std(std::span<const double> values);

struct MetricCorrelation {
  std::string metric;
  CorrelationResult tau;
  CorrelationResult rho;
};

// Metric columns in table order.
const std::vector<std::string>& metric_names();
// Value of a named column, absent for missing optionals.
std::optional<double> metric_value(const ling::DifficultyProfile& p, std::string_view metric);

// One row per metric with at least two present values and nonconstant
// columns; rows where a column is constant are omitted.
std::vector<MetricCorrelation> metric_score_correlation(const std::vector<ling::DifficultyProfile>& profiles,
                                                        const std::vector<double>& scores);

struct ElementQuestion {
  std::string element;
  std::string question;
};

struct QuestionSetComparison {
  double mean_bleu = 0.0;
  int matched_elements = 0;
};

// Mean sentence BLEU between questions that cover the same element
// (case-insensitive); for each element of `a` the best-matching question of
// `b` is used. Throws kUndefined when no element is shared.
QuestionSetComparison compare_question_sets(const std::vector<ElementQuestion>& a,
                                            const std::vector<ElementQuestion>& b);

}  // namespace mt2ie::stats
