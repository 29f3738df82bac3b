// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "core/codec.hpp"
#include "core/error.hpp"
#include "core/lingmetrics.hpp"
#include "core/mock_gateway.hpp"
#include "core/prompt_engine.hpp"
#include "core/runner.hpp"
#include "core/scoring.hpp"
#include "core/stats.hpp"
#include "core/templates.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mt2ie;

namespace {

// Collects the first few problems of a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) problems_ += (problems_.empty() ? "" : "; ") + what;
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    return failures_ > 3 ? fmt::format("{} (+{} more)", problems_, failures_ - 3) : problems_;
  }

 private:
  int failures_ = 0;
  std::string problems_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  run::RunLedger ledger;
  std::string text;
};

Outcome run_with(const run::RunConfig& config) {
  const auto gw = run::make_gateways(config);
  std::ostringstream out;
  run::LedgerWriter writer(out);
  run::RunOptions opts;
  opts.writer = &writer;
  opts.clock = fixtures::fixed_clock;
  auto ledger = run::run_once(config, gw, opts);
  return {std::move(ledger), out.str()};
}

void criterion_1(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> base = {1, 2, 3, 4, 5};
  std::vector<std::vector<double>> perms;
  do perms.push_back(base);
  while (std::next_permutation(base.begin(), base.end()));
  for (const auto& x : perms) {
    for (const auto& y : perms) {
      const double got = stats::kendall_tau_b(x, y);
      const double want = oracle::kendall_tau_b(x, y);
      c.expect(std::abs(got - want) < 1e-15, fmt::format("tau {} vs oracle {}", got, want));
    }
  }
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 30);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng() % 6);
    for (auto& v : y) v = static_cast<double>(rng() % 6);
    const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
                          std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (constant) continue;
    const double rho = stats::spearman(x, y);
    c.expect(std::abs(rho - oracle::spearman_rho(x, y)) < 1e-12, "spearman differs from oracle");
    c.expect(std::abs(stats::kendall_tau_b(x, y) - oracle::kendall_tau_b(x, y)) < 1e-12,
             "tau-b with ties differs from oracle");
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 5.0, fmt::format("took {:.2f}s", elapsed));
}

void criterion_2(Check& c) {
  for (int n = 1; n <= 5; ++n) {
    for (const auto& t : oracle::binary_trees(0, n)) {
      const double got = ling::yngve_score(t);
      c.expect(got == oracle::yngve_by_climbing(t), fmt::format("tree {} gave {}", ling::to_bracketed(t), got));
    }
  }
  for (int n = 1; n <= 10; ++n) {
    std::vector<std::string> tokens;
    for (int i = 0; i < n; ++i) tokens.push_back("w" + std::to_string(i));
    const double got = ling::yngve_score(ling::fallback_tree(tokens));
    c.expect(std::abs(got - (n - 1.0) / n) < 1e-12, fmt::format("fallback n={} gave {}", n, got));
  }
}

void criterion_3(Check& c) {
  const auto rows = fixtures::read_tsv("flesch_kincaid.tsv");
  c.expect(rows.size() == 20, fmt::format("{} fixture rows", rows.size()));
  for (const auto& row : rows) {
    const double want = std::stod(row.at(4));
    const double got = ling::flesch_kincaid(row.at(0));
    c.expect(std::abs(got - want) <= 0.01, fmt::format("'{}' gave {:.3f}, want {:.3f}", row.at(0), got, want));
  }
}

void criterion_4(Check& c) {
  const double same = stats::sentence_bleu("a man riding a red bicycle down the street", "a man riding a red bicycle down the street");
  c.expect(std::abs(same - 1.0) < 1e-9, fmt::format("identity gave {}", same));
  const double disjoint = stats::sentence_bleu("blue sky above", "green grass below", 4);
  c.expect(std::abs(disjoint) < 1e-9, fmt::format("disjoint gave {}", disjoint));
  const auto clip = stats::modified_precision("the the the the", "the cat", 1);
  c.expect(clip.matches == 1 && clip.total == 4, fmt::format("clipped {}/{}", clip.matches, clip.total));
  const double unigram = stats::sentence_bleu("the the the the", "the cat", 1);
  c.expect(std::abs(unigram - 0.25) < 1e-9, fmt::format("clipped unigram BLEU gave {}", unigram));
}

void criterion_5(Check& c) {
  const std::vector<std::pair<double, std::string>> boundaries = {
      {0.0, "halve"}, {0.2, "halve"}, {0.4, "reduce"}, {0.6, "increase1"}, {0.8, "increase2"}, {1.0, "increase2"}};
  for (const auto& [s, want] : boundaries) {
    const auto got = std::string(prompt::to_string(prompt::select_bin(s).id));
    c.expect(got == want, fmt::format("{} went to {}", s, got));
  }
  for (int i = 0; i <= 10000; ++i) {
    const double s = i / 10000.0;
    int hits = 0;
    for (const auto& b : prompt::score_bins()) hits += b.interval.contains(s);
    c.expect(hits == 1, fmt::format("{} hit {} bins", s, hits));
  }
}

void criterion_6(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = run_with(fixtures::mock_config());
  const auto b = run_with(fixtures::mock_config());
  const double elapsed = seconds_since(t0) / 2.0;
  c.expect(a.ledger.record_count() == 20, fmt::format("{} records", a.ledger.record_count()));
  c.expect(a.ledger.failed_chains() == 0, "chains failed");
  c.expect(a.text == b.text, "replays differ");
  c.expect(elapsed < 10.0, fmt::format("run took {:.2f}s", elapsed));
}

void criterion_7(Check& c) {
  fixtures::TempDir dir;
  const auto script = fixtures::write_script(dir, "adaptive.json", fixtures::adaptive_example_script());
  const auto out = run_with(fixtures::adaptive_example_config(script));
  const auto f = fixtures::adaptive_example();
  c.expect(out.ledger.chains.size() == 1, "expected one chain");
  const auto& recs = out.ledger.chains.at(0).records;
  c.expect(recs.size() == 5, fmt::format("{} records", recs.size()));
  for (std::size_t i = 0; i < std::min<std::size_t>(recs.size(), 5); ++i) {
    c.expect(recs[i].prompt.text == f.prompts[i], fmt::format("prompt {} differs", i + 1));
    c.expect(recs[i].score && std::abs(recs[i].score->value - f.scores[i]) < 1e-9, fmt::format("score {} differs", i + 1));
    if (i > 0) {
      const auto bin = recs[i].bin_applied ? std::string(prompt::to_string(*recs[i].bin_applied)) : "none";
      c.expect(bin == f.bins[i - 1], fmt::format("iteration {} used {}", i + 1, bin));
    }
  }
}

void criterion_8(Check& c) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lp(-20.0, 0.0), shift(-100.0, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    LogprobMap m = {{"Yes", lp(rng)}, {"No", lp(rng)}, {"yes", lp(rng)}, {"no", lp(rng)}, {"Maybe", lp(rng)}};
    LogprobMap shifted;
    const double s = shift(rng);
    for (const auto& [k, v] : m) shifted[k] = v + s;
    const double a = scoring::normalized_yes_probability(m);
    const double b = scoring::normalized_yes_probability(shifted);
    c.expect(std::abs(a - b) < 1e-12, fmt::format("shift {} moved {} to {}", s, a, b));
  }
  const double v = scoring::normalized_yes_probability({{"Yes", std::log(0.9)}, {"No", std::log(0.1)}});
  c.expect(std::abs(v - 0.9) < 1e-12, fmt::format("0.9/0.1 gave {}", v));
}

void criterion_9(Check& c) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0), y(0.0, 4.0);
  for (int trial = 0; trial < 1000; ++trial) {
    run::Chain chain;
    const int n = 1 + static_cast<int>(rng() % 10);
    std::vector<double> scores;
    for (int i = 0; i < n; ++i) {
      run::IterationRecord r;
      r.index = i;
      r.score = scoring::ConsistencyScore{u(rng), scoring::Method::kVqaScore, {}};
      r.difficulty.word_count = 1 + static_cast<int>(rng() % 40);
      r.difficulty.yngve = y(rng) + 0.01;
      scores.push_back(r.score->value);
      chain.records.push_back(r);
    }
    const auto fs = run::weighted_final_score(chain);
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    c.expect(fs.value && *fs.value >= *lo - 1e-12 && *fs.value <= *hi + 1e-12,
             fmt::format("weighted {} outside [{}, {}]", fs.value.value_or(-1), *lo, *hi));
  }
}

void criterion_10(Check& c) {
  fixtures::TempDir dir;
  auto script = MockScript::builtin_json("scripted");
  script["faults"] = {{{"op", "generate_image"}, {"call", 8}, {"error", "timeout"}}};
  const auto out = run_with(fixtures::mock_config(fixtures::write_script(dir, "fault.json", script)));
  const auto& chains = out.ledger.chains;
  c.expect(chains.size() == 4, "expected four chains");
  c.expect(out.ledger.failed_chains() == 1, fmt::format("{} failed chains", out.ledger.failed_chains()));
  for (std::size_t i = 0; i < chains.size(); ++i) {
    if (i == 1) {
      c.expect(chains[i].error && chains[i].error->code == ErrorCode::kTimeout && chains[i].error->iteration == 2,
               "chain 2 should stop with a timeout at its third iteration");
      c.expect(chains[i].records.size() == 2, "chain 2 keeps the records before the fault");
    } else {
      c.expect(!chains[i].error && chains[i].records.size() == 5, fmt::format("chain {} was affected", i + 1));
    }
  }
  const auto back = run::parse_ledger(out.text);
  c.expect(back == out.ledger, "ledger did not round-trip");
  std::ostringstream again;
  run::write_ledger(back, again);
  c.expect(again.str() == out.text, "rewritten ledger differs");
}

void criterion_11(Check& c) {
  for (const auto& id : templates::ids()) {
    const auto file = std::string(MT2IE_FIXTURE_DIR) + "/../../assets/templates/" + id + ".txt";
    const auto actual = sha256_hex(std::string_view(fixtures::slurp(file)));
    c.expect(templates::recorded_digest(id) == actual && templates::embedded_digest(id) == actual,
             "digest mismatch for " + id);
  }
  const auto parsed = scoring::parse_mcq_block(fixtures::red_crab_block());
  c.expect(parsed.questions.size() == 4, fmt::format("red crab block gave {} questions", parsed.questions.size()));
  c.expect(prompt::parse_prompt_reply("Sure. Prompt: a dog under a tree") == "a dog under a tree",
           "prompt marker not parsed");
}

void criterion_12(Check& c) {
  std::vector<ling::DifficultyProfile> profiles;
  std::vector<double> up, down;
  for (int i = 0; i < 12; ++i) {
    ling::DifficultyProfile p;
    p.word_count = 3 + i;
    p.syllable_count = 4 + 2 * i;
    p.avg_syllables_per_word = static_cast<double>(p.syllable_count) / p.word_count;
    p.avg_word_length = 4.0 + (i % 3);
    p.flesch_kincaid = 0.5 * i;
    p.yngve = 1.0 + 0.1 * i;
    profiles.push_back(p);
    up.push_back(p.word_count);
    down.push_back(-p.word_count);
  }
  auto tau_of = [](const std::vector<stats::MetricCorrelation>& rows, const std::string& m) {
    for (const auto& r : rows) {
      if (r.metric == m) return r.tau.value;
    }
    return std::nan("");
  };
  const auto pos = stats::metric_score_correlation(profiles, up);
  const auto neg = stats::metric_score_correlation(profiles, down);
  c.expect(tau_of(pos, "word_count") == 1.0, fmt::format("tau {}", tau_of(pos, "word_count")));
  c.expect(tau_of(neg, "word_count") == -1.0, fmt::format("negated tau {}", tau_of(neg, "word_count")));
  c.expect(tau_of(pos, "yngve") == 1.0, "yngve column should follow word count");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"rank correlations match pairwise oracles", criterion_1},
      {"Yngve depth matches the climbing oracle", criterion_2},
      {"Flesch-Kincaid grade within 0.01 of fixtures", criterion_3},
      {"BLEU identity, disjoint and clipping", criterion_4},
      {"score bin boundaries partition [0,1]", criterion_5},
      {"default mock run is complete and reproducible", criterion_6},
      {"adaptive example chain replays", criterion_7},
      {"VQAScore normalization is shift invariant", criterion_8},
      {"weighted final score stays within the chain range", criterion_9},
      {"ledger round trip and fault isolation", criterion_10},
      {"template digests and reply parsing", criterion_11},
      {"metric correlation sign", criterion_12},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("threw: ") + e.what());
    }
    if (c.ok()) {
      std::printf("PASS [%zu] %s\n", i + 1, criteria[i].first.c_str());
    } else {
      ++failed;
      std::printf("FAIL [%zu] %s: %s\n", i + 1, criteria[i].first.c_str(), c.summary().c_str());
    }
  }
  return failed == 0 ? 0 : 1;
}
