// mt2ie command-line front end. Talks to the library only through mt2ie.h.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mt2ie/mt2ie.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

int report_failure(const char* what, mt2ie_status st) {
  std::cerr << "mt2ie: " << what << " failed (" << mt2ie_status_name(st) << "): " << mt2ie_last_error() << "\n";
  switch (st) {
    case MT2IE_E_CONFIG:
    case MT2IE_E_PRECONDITION:
    case MT2IE_E_PARSE:
    case MT2IE_E_SCHEMA:
    case MT2IE_E_IO:
      return kExitConfig;
    default:
      return kExitPartial;
  }
}

struct ConfigHandle {
  mt2ie_config* ptr = nullptr;
  ~ConfigHandle() { mt2ie_config_free(ptr); }
};

struct CommonOptions {
  std::string config;
  std::optional<std::string> mock;
  std::optional<std::string> template_set;
};

mt2ie_status load(const CommonOptions& o, ConfigHandle& h) {
  auto st = mt2ie_config_load(o.config.c_str(), &h.ptr);
  if (st != MT2IE_OK) return st;
  if (o.mock) {
    st = mt2ie_config_set_mock(h.ptr, o.mock->c_str());
    if (st != MT2IE_OK) return st;
  }
  if (o.template_set) st = mt2ie_config_set_template_set(h.ptr, o.template_set->c_str());
  return st;
}

void on_chain(const mt2ie_chain_summary* s, void*) {
  std::string score = s->has_final_score ? std::to_string(s->final_score) : "n/a";
  std::printf("repeat %d chain %d [%s]: %d record(s), final score %s%s%s\n", s->repeat + 1, s->chain, s->category,
              s->records, score.c_str(), s->truncated ? ", truncated: " : "", s->truncated ? s->error : "");
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agentic text-to-image evaluation harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mt2ie_version()));

  CommonOptions run_opts;
  std::string run_out;
  std::optional<std::string> mode;
  std::optional<int> iterations;
  std::optional<int> repeats;
  auto* run = app.add_subcommand("run", "Run an evaluation and write ledger(s)");
  run->add_option("--config", run_opts.config, "Run configuration (JSON)")->required();
  run->add_option("--out", run_out, "Ledger path")->required();
  run->add_option("--mode", mode, "iterative | adaptive | static | aesthetic");
  run->add_option("--mock", run_opts.mock, "Mock script for every endpoint (builtin name or path)");
  run->add_option("--iterations", iterations, "Iterations per seed");
  run->add_option("--repeats", repeats, "Repeat count");
  run->add_option("--template-set", run_opts.template_set, "Question template set");

  CommonOptions score_opts;
  std::string image, prompt, method = "vqascore";
  auto* score = app.add_subcommand("score", "Score one image against a prompt");
  score->add_option("--config", score_opts.config, "Configuration holding the MLLM endpoint")->required();
  score->add_option("--image", image, "PNG image")->required();
  score->add_option("--prompt", prompt, "Prompt text")->required();
  score->add_option("--method", method, "vqascore | vqa-accuracy | aesthetic");
  score->add_option("--mock", score_opts.mock, "Mock script for every endpoint");
  score->add_option("--template-set", score_opts.template_set, "Question template set");

  std::vector<std::string> analyze_ledgers;
  std::string analyze_out;
  auto* analyze = app.add_subcommand("analyze", "Difficulty and score curves plus metric correlations");
  analyze->add_option("ledgers", analyze_ledgers, "Ledger files")->required();
  analyze->add_option("--out", analyze_out, "Output directory")->required();

  std::vector<std::string> rank_ledgers;
  std::string rank_out;
  std::optional<std::string> reference;
  auto* rank = app.add_subcommand("rank", "Rank T2I models across ledgers");
  rank->add_option("ledgers", rank_ledgers, "Ledger files")->required();
  rank->add_option("--out", rank_out, "Output directory")->required();
  rank->add_option("--reference-ranking", reference, "Rank file to correlate against");

  std::string rank_a, rank_b;
  auto* compare = app.add_subcommand("compare", "Rank correlations between two rank files");
  compare->add_option("a", rank_a, "First rank file")->required();
  compare->add_option("b", rank_b, "Second rank file")->required();

  CommonOptions validate_opts;
  auto* validate = app.add_subcommand("validate-config", "Check a configuration file");
  validate->add_option("--config", validate_opts.config, "Run configuration (JSON)")->required();
  validate->add_option("--mock", validate_opts.mock, "Mock script for every endpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*run) {
    ConfigHandle h;
    auto st = load(run_opts, h);
    if (st == MT2IE_OK && mode) st = mt2ie_config_set_mode(h.ptr, mode->c_str());
    if (st == MT2IE_OK && iterations) st = mt2ie_config_set_iterations(h.ptr, *iterations);
    if (st == MT2IE_OK && repeats) st = mt2ie_config_set_repeats(h.ptr, *repeats);
    if (st != MT2IE_OK) return report_failure("configuration", st);
    int failed = 0;
    st = mt2ie_run(h.ptr, run_out.c_str(), on_chain, nullptr, &failed);
    if (st != MT2IE_OK) return report_failure("run", st);
    if (failed > 0) {
      std::cerr << "mt2ie: " << failed << " chain(s) recorded errors\n";
      return kExitPartial;
    }
    return kExitOk;
  }

  if (*score) {
    ConfigHandle h;
    auto st = load(score_opts, h);
    if (st != MT2IE_OK) return report_failure("configuration", st);
    double value = 0.0;
    st = mt2ie_score_image(h.ptr, image.c_str(), prompt.c_str(), method.c_str(), &value);
    if (st != MT2IE_OK) return report_failure("score", st);
    std::printf("%.6g\n", value);
    return kExitOk;
  }

  if (*analyze) {
    const auto paths = c_strings(analyze_ledgers);
    const auto st = mt2ie_analyze(paths.data(), paths.size(), analyze_out.c_str());
    if (st != MT2IE_OK) return report_failure("analyze", st);
    std::printf("wrote analysis to %s\n", analyze_out.c_str());
    return kExitOk;
  }

  if (*rank) {
    const auto paths = c_strings(rank_ledgers);
    char* text = nullptr;
    const auto st =
        mt2ie_rank(paths.data(), paths.size(), rank_out.c_str(), reference ? reference->c_str() : nullptr, &text);
    if (st != MT2IE_OK) return report_failure("rank", st);
    std::fputs(text, stdout);
    mt2ie_string_free(text);
    return kExitOk;
  }

  if (*compare) {
    double tau = 0.0, rho = 0.0;
    const auto st = mt2ie_compare_rank_files(rank_a.c_str(), rank_b.c_str(), &tau, &rho);
    if (st != MT2IE_OK) return report_failure("compare", st);
    std::printf("kendall_tau\t%.6f\nspearman_rho\t%.6f\n", tau, rho);
    return kExitOk;
  }

  if (*validate) {
    ConfigHandle h;
    const auto st = load(validate_opts, h);
    if (st != MT2IE_OK) return report_failure("validate-config", st);
    std::printf("configuration ok\n");
    return kExitOk;
  }
  return kExitConfig;
}
