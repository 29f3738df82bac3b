#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "core/error.hpp"
#include "core/report.hpp"
#include "support/fixtures.hpp"

using namespace mt2ie;
using namespace mt2ie::report;
using nlohmann::json;

namespace {

// Hand-built ledger: one chain per entry of `chains`, one record per score.
run::RunLedger ledger(const std::string& t2i, const std::vector<std::vector<double>>& chains, bool yngve = true,
                      const std::string& judge = "judge", const std::string& mode = "iterative") {
  run::RunLedger l;
  l.run_id = t2i + "-run";
  l.config = {{"mode", mode}};
  l.mllm_model = judge;
  l.t2i_model = t2i;
  int id = 0;
  for (const auto& scores : chains) {
    run::Chain c;
    c.id = ++id;
    c.category = "user";
    for (std::size_t i = 0; i < scores.size(); ++i) {
      run::IterationRecord r;
      r.index = static_cast<int>(i);
      r.prompt.text = "p" + std::to_string(i);
      r.prompt.iteration_index = r.index;
      r.score = scoring::ConsistencyScore{scores[i], scoring::Method::kVqaScore, {}};
      r.difficulty.word_count = 3 + static_cast<int>(i) * 2;
      r.difficulty.syllable_count = 4 + static_cast<int>(i) * 3;
      r.difficulty.avg_syllables_per_word = static_cast<double>(r.difficulty.syllable_count) / r.difficulty.word_count;
      r.difficulty.avg_word_length = 4.0;
      r.difficulty.flesch_kincaid = static_cast<double>(i);
      if (yngve) r.difficulty.yngve = 0.5 + static_cast<double>(i) / 10.0;
      c.records.push_back(r);
    }
    const auto fs = run::unweighted_final_score(c);
    c.final_score = fs.value;
    c.weight_basis = fs.basis;
    l.chains.push_back(c);
  }
  return l;
}

ErrorCode code_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kUndefined;
}

}  // namespace

TEST(Report, DominatingModelRanksFirst) {
  const auto r = build_report({ledger("A", {{0.9, 0.8}}), ledger("B", {{0.5, 0.4}})});
  EXPECT_EQ(r.ranking.rank_of("A"), 1.0);
  EXPECT_EQ(r.ranking.rank_of("B"), 2.0);
  ASSERT_EQ(r.models.size(), 2u);
  EXPECT_NEAR(r.models[0].score.mean, 0.85, 1e-12);
  EXPECT_FALSE(r.tau.has_value());
}

TEST(Report, SelfReferenceGivesPerfectAgreement) {
  const std::vector<run::RunLedger> ls = {ledger("A", {{0.9}}), ledger("B", {{0.5}}), ledger("C", {{0.7}})};
  const auto first = build_report(ls);
  const auto again = build_report(ls, first.ranking);
  ASSERT_TRUE(again.tau.has_value());
  EXPECT_DOUBLE_EQ(again.tau->value, 1.0);
  EXPECT_DOUBLE_EQ(again.rho->value, 1.0);
}

TEST(Report, EightModelsOverFiveRepeatsMatchMeanStd) {
  std::mt19937_64 rng(85);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<run::RunLedger> ls;
  std::map<std::string, std::vector<double>> expected;
  for (int m = 0; m < 8; ++m) {
    const std::string model = "t2i-" + std::to_string(m);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<std::vector<double>> chains;
      double sum = 0.0;
      for (int c = 0; c < 4; ++c) {
        std::vector<double> s(5);
        for (auto& v : s) v = u(rng);
        double mean = 0.0;
        for (double v : s) mean += v / 5.0;
        sum += mean;
        chains.push_back(s);
      }
      expected[model].push_back(sum / 4.0);
      ls.push_back(ledger(model, chains));
    }
  }
  const auto r = build_report(ls);
  ASSERT_EQ(r.models.size(), 8u);
  for (const auto& m : r.models) {
    const auto want = stats::mean_std(expected[m.model]);
    EXPECT_NEAR(m.score.mean, want.mean, 1e-12) << m.model;
    EXPECT_NEAR(*m.score.std, *want.std, 1e-12) << m.model;
    EXPECT_EQ(m.repeats, 5);
  }
  double rank_sum = 0.0;
  for (const auto& m : r.models) rank_sum += m.rank;
  EXPECT_DOUBLE_EQ(rank_sum, 36.0);
}

TEST(Report, InconsistentLedgersAreRejected) {
  std::string msg;
  EXPECT_EQ(code_of([] { build_report({ledger("A", {{0.9}}), ledger("A", {{0.8}}), ledger("B", {{0.5}})}); }, &msg),
            ErrorCode::kPrecondition);
  EXPECT_EQ(code_of([] { build_report({ledger("A", {{0.9}}), ledger("B", {{0.5}}, true, "other-judge")}); }),
            ErrorCode::kPrecondition);
  EXPECT_EQ(code_of([] { build_report({ledger("A", {{0.9}}), ledger("B", {{0.5}}, true, "judge", "adaptive")}); }),
            ErrorCode::kPrecondition);
  EXPECT_EQ(code_of([] { build_report({}); }), ErrorCode::kPrecondition);
  const auto r = build_report({ledger("A", {{0.9}}), ledger("B", {{0.5}})});
  const stats::RankVector other({{"A", 1.0}, {"C", 0.0}});
  EXPECT_EQ(code_of([&] { build_report({ledger("A", {{0.9}}), ledger("B", {{0.5}})}, other); }),
            ErrorCode::kPrecondition);
}

TEST(Report, SeriesFollowIterations) {
  const auto r = build_report({ledger("A", {{0.9, 0.7, 0.5}, {0.7, 0.5, 0.3}})});
  ASSERT_EQ(r.score_vs_iteration.size(), 1u);
  const auto& pts = r.score_vs_iteration[0].points;
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_NEAR(pts[0].mean, 0.8, 1e-12);
  EXPECT_NEAR(pts[2].mean, 0.4, 1e-12);
  EXPECT_EQ(pts[1].n, 2);
  EXPECT_EQ(r.difficulty_metric, "yngve");
  EXPECT_NEAR(r.difficulty_vs_iteration[0].points[2].mean, 0.7, 1e-12);
}

TEST(Report, MissingYngveDropsItsCorrelationRow) {
  const auto with = build_report({ledger("A", {{0.9, 0.7, 0.5}, {0.8, 0.4, 0.6}})});
  const auto without = build_report({ledger("A", {{0.9, 0.7, 0.5}, {0.8, 0.4, 0.6}}, false)});
  auto has = [](const Report& r, const std::string& m) {
    return std::any_of(r.metric_correlation.begin(), r.metric_correlation.end(),
                       [&](const auto& row) { return row.metric == m; });
  };
  EXPECT_TRUE(has(with, "yngve"));
  EXPECT_FALSE(has(without, "yngve"));
  EXPECT_TRUE(has(without, "word_count"));
  EXPECT_EQ(without.difficulty_metric, "word_count");
}

TEST(Report, AnalysisWritesTheInventory) {
  fixtures::TempDir dir;
  const auto r = build_report({ledger("A", {{0.9, 0.7}}), ledger("B", {{0.6, 0.2}})});
  const auto files = write_analysis(r, dir.str());
  std::vector<std::string> names;
  for (const auto& f : files) names.push_back(std::filesystem::path(f).filename().string());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(names, (std::vector<std::string>{"difficulty_vs_iteration.svg", "difficulty_vs_iteration.tsv",
                                             "metric_correlation.tsv", "score_vs_iteration.svg",
                                             "score_vs_iteration.tsv"}));
  const auto svg = fixtures::slurp(dir.str() + "/score_vs_iteration.svg");
  EXPECT_TRUE(svg.starts_with("<svg") || svg.starts_with("<?xml"));
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_NE(svg.find(">A<"), std::string::npos);
  const auto tsv = fixtures::slurp(dir.str() + "/score_vs_iteration.tsv");
  EXPECT_NE(tsv.find("A\t"), std::string::npos);
}

TEST(Report, RankingFiles) {
  fixtures::TempDir dir;
  const std::vector<run::RunLedger> ls = {ledger("A", {{0.9}}), ledger("B", {{0.5}})};
  const auto plain = write_ranking(build_report(ls), dir.file("plain"));
  EXPECT_EQ(plain.size(), 2u);
  const auto ref = stats::RankVector({{"A", 0.1}, {"B", 0.9}});
  const auto withref = write_ranking(build_report(ls, ref), dir.file("ref"));
  EXPECT_EQ(withref.size(), 3u);
  const auto corr = fixtures::slurp(dir.file("ref") + "/rank_correlation.tsv");
  EXPECT_NE(corr.find("kendall-tau\t-1"), std::string::npos) << corr;
  EXPECT_EQ(read_rank_file(dir.file("plain") + "/ranking.tsv"), build_report(ls).ranking);
}

TEST(RankFile, ParsesCommentsTabsAndSpaces) {
  const auto r = parse_rank_file("# reference\n\nmodel a\t0.5\nmodel b 0.25\nc\t1\n");
  EXPECT_EQ(r.size(), 3u);
  EXPECT_EQ(r.score_of("model a"), 0.5);
  EXPECT_EQ(r.score_of("model b"), 0.25);
  EXPECT_EQ(r.rank_of("c"), 1.0);
}

TEST(RankFile, ErrorsNameTheLine) {
  std::string msg;
  EXPECT_EQ(code_of([] { parse_rank_file("a 1\nb\n"); }, &msg), ErrorCode::kParse);
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_EQ(code_of([] { parse_rank_file("a one\n"); }, &msg), ErrorCode::kParse);
  EXPECT_EQ(code_of([] { parse_rank_file("# only\n"); }), ErrorCode::kParse);
  EXPECT_EQ(code_of([] { parse_rank_file("a 1\na 2\n"); }), ErrorCode::kParse);
}

TEST(RankFile, FormatRoundTrips) {
  const stats::RankVector r({{"x", 0.1234567890123}, {"y", 1.0 / 3.0}, {"z", -2.0}});
  EXPECT_EQ(parse_rank_file(format_rank_file(r)), r);
}

TEST(Report, LedgerScoreNeedsAFinalScore) {
  run::RunLedger l;
  l.chains.push_back(run::Chain{});
  EXPECT_EQ(code_of([&] { ledger_score(l); }), ErrorCode::kUndefined);
}
