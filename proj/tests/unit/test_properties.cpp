// Randomized invariants across the numeric modules.
#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "core/lingmetrics.hpp"
#include "core/runner.hpp"
#include "core/scoring.hpp"
#include "core/stats.hpp"
#include "support/oracles.hpp"

using namespace mt2ie;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, int n, int levels) {
  std::uniform_int_distribution<int> d(0, levels - 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool constant(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

ling::ConstituencyTree relabel(const ling::ConstituencyTree& t, std::mt19937_64& rng) {
  if (t.is_leaf()) return t;
  std::vector<ling::ConstituencyTree> kids;
  for (const auto& c : t.children) kids.push_back(relabel(c, rng));
  return ling::ConstituencyTree::node("L" + std::to_string(rng() % 1000), std::move(kids));
}

const std::vector<std::string> kWordPool = {"a",     "red",  "cat",    "sat", "on",     "the",      "mat",
                                            "table", "idea", "yellow", "dog", "kitten", "umbrella", "sky"};

std::string random_text(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 15), pick(0, static_cast<int>(kWordPool.size()) - 1), punct(0, 6);
  std::string out;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kWordPool[pick(rng)];
    const int p = punct(rng);
    if (p == 0) out += '.';
    if (p == 1) out += ',';
    if (p == 2) out += '?';
  }
  return out;
}

}  // namespace

TEST(Properties, CorrelationsInvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = random_vector(rng, 12, 6);
    const auto y = random_vector(rng, 12, 6);
    if (constant(x) || constant(y)) continue;
    std::vector<double> fx(x.size()), gy(y.size());
    std::transform(x.begin(), x.end(), fx.begin(), [](double v) { return std::exp(v) * 3.0 - 7.0; });
    std::transform(y.begin(), y.end(), gy.begin(), [](double v) { return std::cbrt(v) + 100.0; });
    EXPECT_NEAR(stats::kendall_tau_b(x, y), stats::kendall_tau_b(fx, gy), 1e-12);
    EXPECT_NEAR(stats::spearman(x, y), stats::spearman(fx, gy), 1e-12);
  }
}

TEST(Properties, CorrelationsAreSymmetricAndBounded) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = random_vector(rng, 9, 4);
    const auto y = random_vector(rng, 9, 4);
    if (constant(x) || constant(y)) continue;
    const double t = stats::kendall_tau_b(x, y);
    const double r = stats::spearman(x, y);
    EXPECT_DOUBLE_EQ(t, stats::kendall_tau_b(y, x));
    EXPECT_NEAR(r, stats::spearman(y, x), 1e-15);
    EXPECT_LE(std::abs(t), 1.0);
    EXPECT_LE(std::abs(r), 1.0);
  }
}

TEST(Properties, BleuIdentityAndRange) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_text(rng);
    const auto b = random_text(rng);
    EXPECT_DOUBLE_EQ(stats::bleu({a}, {a}), 1.0) << a;
    EXPECT_DOUBLE_EQ(stats::sentence_bleu(a, a), 1.0) << a;
    const double c = stats::bleu({a}, {b});
    const double s = stats::sentence_bleu(a, b);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Properties, RankSumsAreTriangular) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::map<std::string, std::vector<double>> scores;
    for (int m = 0; m < n; ++m) scores["m" + std::to_string(m)] = random_vector(rng, 3, 3);
    const auto r = stats::rank_models(scores);
    const double sum = std::accumulate(r.ranks().begin(), r.ranks().end(), 0.0);
    EXPECT_DOUBLE_EQ(sum, n * (n + 1) / 2.0);
  }
}

TEST(Properties, YngveIgnoresInteriorLabels) {
  std::mt19937_64 rng(5);
  for (int n = 1; n <= 6; ++n) {
    for (const auto& t : oracle::binary_trees(0, n)) {
      EXPECT_DOUBLE_EQ(ling::yngve_score(t), ling::yngve_score(relabel(t, rng)));
    }
  }
}

TEST(Properties, RightBranchingMinimizesYngve) {
  for (int n = 1; n <= 5; ++n) {
    const double right = ling::yngve_score(oracle::right_branching(n));
    for (const auto& t : oracle::binary_trees(0, n)) {
      EXPECT_DOUBLE_EQ(ling::yngve_score(t), oracle::yngve_by_climbing(t));
      EXPECT_LE(right, ling::yngve_score(t));
    }
  }
}

TEST(Properties, FleschKincaidIgnoresCase) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const auto t = random_text(rng);
    std::string upper = t, mixed = t;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    for (std::size_t i = 0; i < mixed.size(); i += 2) mixed[i] = static_cast<char>(std::toupper(mixed[i]));
    EXPECT_DOUBLE_EQ(ling::flesch_kincaid(t), ling::flesch_kincaid(upper)) << t;
    EXPECT_DOUBLE_EQ(ling::flesch_kincaid(t), ling::flesch_kincaid(mixed)) << t;
  }
}

TEST(Properties, ProfileAveragesAreQuotientsOfCounts) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto t = random_text(rng);
    const auto p = ling::difficulty_profile(t);
    const auto c = ling::count_text(t);
    EXPECT_EQ(p.word_count, c.words);
    EXPECT_EQ(p.syllable_count, c.syllables);
    EXPECT_EQ(p.avg_syllables_per_word, static_cast<double>(p.syllable_count) / p.word_count);
    EXPECT_EQ(p.avg_word_length, static_cast<double>(c.letters) / p.word_count);
  }
}

TEST(Properties, VqaScoreIsShiftInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lp(-20.0, 0.0), shift(-50.0, 50.0);
  for (int trial = 0; trial < 500; ++trial) {
    LogprobMap m = {{"Yes", lp(rng)}, {"No", lp(rng)}};
    if (trial % 2) m["yes"] = lp(rng);
    if (trial % 3) m["no"] = lp(rng);
    m["Maybe"] = lp(rng);
    LogprobMap shifted;
    const double s = shift(rng);
    for (const auto& [k, v] : m) shifted[k] = v + s;
    const double a = scoring::normalized_yes_probability(m);
    EXPECT_NEAR(a, scoring::normalized_yes_probability(shifted), 1e-12);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Properties, WeightedMeanStaysWithinScoreRange) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0), w(0.0, 5.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    std::vector<double> s(n), d(n);
    for (auto& v : s) v = u(rng);
    for (auto& v : d) v = w(rng) + 1e-3;
    const double r = run::weighted_mean(s, d);
    EXPECT_GE(r, *std::min_element(s.begin(), s.end()));
    EXPECT_LE(r, *std::max_element(s.begin(), s.end()));
  }
}
