#include "mt2ie/mt2ie.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "core/codec.hpp"
#include "core/error.hpp"
#include "core/lingmetrics.hpp"
#include "core/report.hpp"
#include "core/runner.hpp"
#include "core/scoring.hpp"
#include "core/stats.hpp"

struct mt2ie_config {
  mt2ie::run::RunConfig config;
};

struct mt2ie_ledger {
  mt2ie::run::RunLedger ledger;
};

namespace {

thread_local std::string g_last_error;

mt2ie_status status_of(mt2ie::ErrorCode code) {
  using mt2ie::ErrorCode;
  switch (code) {
    case ErrorCode::kPrecondition: return MT2IE_E_PRECONDITION;
    case ErrorCode::kConfig: return MT2IE_E_CONFIG;
    case ErrorCode::kTransport: return MT2IE_E_TRANSPORT;
    case ErrorCode::kTimeout: return MT2IE_E_TIMEOUT;
    case ErrorCode::kMalformedReply: return MT2IE_E_MALFORMED_REPLY;
    case ErrorCode::kLogprobsUnsupported: return MT2IE_E_LOGPROBS_UNSUPPORTED;
    case ErrorCode::kScoringUnsupported: return MT2IE_E_SCORING_UNSUPPORTED;
    case ErrorCode::kSafetyRefusal: return MT2IE_E_SAFETY_REFUSAL;
    case ErrorCode::kParse: return MT2IE_E_PARSE;
    case ErrorCode::kSchema: return MT2IE_E_SCHEMA;
    case ErrorCode::kIo: return MT2IE_E_IO;
    case ErrorCode::kUndefined: return MT2IE_E_UNDEFINED;
  }
  return MT2IE_E_INTERNAL;
}

template <typename F>
mt2ie_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MT2IE_OK;
  } catch (const mt2ie::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MT2IE_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MT2IE_E_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (!p) mt2ie::fail(mt2ie::ErrorCode::kPrecondition, std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<mt2ie::run::RunLedger> read_all(const char* const* paths, size_t count) {
  need(paths, "ledger_paths");
  mt2ie::require(count > 0, "at least one ledger is required");
  std::vector<mt2ie::run::RunLedger> out;
  for (size_t i = 0; i < count; ++i) {
    need(paths[i], "ledger path");
    out.push_back(mt2ie::run::read_ledger(paths[i]));
  }
  return out;
}

}  // namespace

extern "C" {

const char* mt2ie_version(void) { return "0.1.0"; }

const char* mt2ie_status_name(mt2ie_status status) {
  switch (status) {
    case MT2IE_OK: return "ok";
    case MT2IE_E_PRECONDITION: return "precondition";
    case MT2IE_E_CONFIG: return "config";
    case MT2IE_E_TRANSPORT: return "transport";
    case MT2IE_E_TIMEOUT: return "timeout";
    case MT2IE_E_MALFORMED_REPLY: return "malformed-reply";
    case MT2IE_E_LOGPROBS_UNSUPPORTED: return "logprobs-unsupported";
    case MT2IE_E_SCORING_UNSUPPORTED: return "scoring-unsupported";
    case MT2IE_E_SAFETY_REFUSAL: return "safety-refusal";
    case MT2IE_E_PARSE: return "parse";
    case MT2IE_E_SCHEMA: return "schema";
    case MT2IE_E_IO: return "io";
    case MT2IE_E_UNDEFINED: return "undefined";
    case MT2IE_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* mt2ie_last_error(void) { return g_last_error.c_str(); }

void mt2ie_string_free(char* s) { std::free(s); }

mt2ie_status mt2ie_config_load(const char* path, mt2ie_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mt2ie_config{mt2ie::run::load_config(path)};
  });
}

mt2ie_status mt2ie_config_parse(const char* json, mt2ie_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      mt2ie::fail(mt2ie::ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
    }
    *out = new mt2ie_config{mt2ie::run::config_from_json(doc)};
  });
}

void mt2ie_config_free(mt2ie_config* config) { delete config; }

mt2ie_status mt2ie_config_set_mode(mt2ie_config* config, const char* mode) {
  return guarded([&] {
    need(config, "config");
    need(mode, "mode");
    auto copy = config->config;
    copy.mode = mt2ie::run::mode_from_string(mode);
    copy.validate();
    config->config = std::move(copy);
  });
}

mt2ie_status mt2ie_config_set_iterations(mt2ie_config* config, int iterations) {
  return guarded([&] {
    need(config, "config");
    if (iterations < 1) mt2ie::fail(mt2ie::ErrorCode::kConfig, "iterations must be >= 1");
    config->config.iterations_per_seed = iterations;
  });
}

mt2ie_status mt2ie_config_set_repeats(mt2ie_config* config, int repeats) {
  return guarded([&] {
    need(config, "config");
    if (repeats < 1) mt2ie::fail(mt2ie::ErrorCode::kConfig, "repeats must be >= 1");
    config->config.repeat_count = repeats;
  });
}

mt2ie_status mt2ie_config_set_template_set(mt2ie_config* config, const char* set) {
  return guarded([&] {
    need(config, "config");
    need(set, "set");
    auto copy = config->config;
    copy.template_set = set;
    copy.validate();
    config->config = std::move(copy);
  });
}

mt2ie_status mt2ie_config_set_mock(mt2ie_config* config, const char* script) {
  return guarded([&] {
    need(config, "config");
    need(script, "script");
    if (!*script) mt2ie::fail(mt2ie::ErrorCode::kConfig, "mock script name is empty");
    mt2ie::run::apply_mock(config->config, script);
  });
}

mt2ie_status mt2ie_config_repeats(const mt2ie_config* config, int* out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = config->config.repeat_count;
  });
}

mt2ie_status mt2ie_config_to_json(const mt2ie_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = dup_string(mt2ie::run::config_to_json(config->config).dump(2));
  });
}

mt2ie_status mt2ie_run(const mt2ie_config* config, const char* out_path, mt2ie_chain_callback callback, void* user,
                       int* failed_chains) {
  return guarded([&] {
    need(config, "config");
    need(out_path, "out_path");
    const auto& cfg = config->config;
    const auto gateways = mt2ie::run::make_gateways(cfg);
    int failed = 0;
    for (int r = 0; r < cfg.repeat_count; ++r) {
      const auto path = mt2ie::run::repeat_path(out_path, r, cfg.repeat_count);
      mt2ie::run::LedgerWriter writer(path);
      mt2ie::run::RunOptions opts;
      opts.repeat = r;
      opts.writer = &writer;
      const auto ledger = mt2ie::run::run_once(cfg, gateways, opts);
      failed += ledger.failed_chains();
      if (!callback) continue;
      for (const auto& c : ledger.chains) {
        mt2ie_chain_summary s{};
        s.repeat = r;
        s.chain = c.id;
        s.category = c.category.c_str();
        s.records = static_cast<int>(c.records.size());
        s.truncated = c.error ? 1 : 0;
        s.has_final_score = c.final_score ? 1 : 0;
        s.final_score = c.final_score.value_or(0.0);
        const std::string err = c.error ? fmt::format("{}: {}", mt2ie::to_string(c.error->code), c.error->message) : "";
        s.error = c.error ? err.c_str() : nullptr;
        s.ledger_path = path.c_str();
        callback(&s, user);
      }
    }
    if (failed_chains) *failed_chains = failed;
  });
}

mt2ie_status mt2ie_score_image(const mt2ie_config* config, const char* png_path, const char* prompt,
                               const char* method, double* out) {
  return guarded([&] {
    need(config, "config");
    need(png_path, "png_path");
    need(prompt, "prompt");
    need(method, "method");
    need(out, "out");
    auto bytes = mt2ie::read_file_bytes(png_path);
    mt2ie::inspect_png(bytes);
    const auto image = mt2ie::ImageArtifact::from_png(std::move(bytes), prompt);
    const auto mllm = mt2ie::make_gateway(config->config.mllm);
    const std::string m = method;
    if (m == "aesthetic") {
      *out = mt2ie::scoring::aesthetic_score(*mllm, image).value;
    } else if (m == "vqascore") {
      *out = mt2ie::scoring::vqascore(*mllm, image, prompt).value;
    } else if (m == "vqa-accuracy") {
      const auto& set = config->config.template_set;
      const auto parsed = mt2ie::scoring::generate_questions(*mllm, prompt, set);
      *out = mt2ie::scoring::vqa_accuracy(*mllm, image, prompt, parsed.questions, set).value;
    } else {
      mt2ie::fail(mt2ie::ErrorCode::kConfig, "unknown scoring method: " + m);
    }
  });
}

mt2ie_status mt2ie_ledger_read(const char* path, mt2ie_ledger** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mt2ie_ledger{mt2ie::run::read_ledger(path)};
  });
}

void mt2ie_ledger_free(mt2ie_ledger* ledger) { delete ledger; }

size_t mt2ie_ledger_chain_count(const mt2ie_ledger* ledger) { return ledger ? ledger->ledger.chains.size() : 0; }

size_t mt2ie_ledger_record_count(const mt2ie_ledger* ledger) { return ledger ? ledger->ledger.record_count() : 0; }

int mt2ie_ledger_failed_chains(const mt2ie_ledger* ledger) { return ledger ? ledger->ledger.failed_chains() : 0; }

mt2ie_status mt2ie_ledger_write(const mt2ie_ledger* ledger, const char* path) {
  return guarded([&] {
    need(ledger, "ledger");
    need(path, "path");
    mt2ie::run::write_ledger(ledger->ledger, std::string(path));
  });
}

mt2ie_status mt2ie_analyze(const char* const* ledger_paths, size_t count, const char* out_dir) {
  return guarded([&] {
    need(out_dir, "out_dir");
    const auto ledgers = read_all(ledger_paths, count);
    mt2ie::report::write_analysis(mt2ie::report::build_report(ledgers), out_dir);
  });
}

mt2ie_status mt2ie_rank(const char* const* ledger_paths, size_t count, const char* out_dir,
                        const char* reference_path, char** report_text) {
  return guarded([&] {
    need(out_dir, "out_dir");
    const auto ledgers = read_all(ledger_paths, count);
    std::optional<mt2ie::stats::RankVector> reference;
    if (reference_path) reference = mt2ie::report::read_rank_file(reference_path);
    const auto report = mt2ie::report::build_report(ledgers, reference);
    mt2ie::report::write_ranking(report, out_dir);
    if (report_text) {
      std::string text;
      for (const auto& m : report.models) {
        text += fmt::format("{}\tmean={:.4f}\tstd={}\trank={:g}\n", m.model, m.score.mean,
                            m.score.std ? fmt::format("{:.4f}", *m.score.std) : "n/a", m.rank);
      }
      if (report.tau) text += fmt::format("kendall_tau={:.4f}\n", report.tau->value);
      if (report.rho) text += fmt::format("spearman_rho={:.4f}\n", report.rho->value);
      *report_text = dup_string(text);
    }
  });
}

mt2ie_status mt2ie_compare_rank_files(const char* path_a, const char* path_b, double* tau, double* rho) {
  return guarded([&] {
    need(path_a, "path_a");
    need(path_b, "path_b");
    const auto a = mt2ie::report::read_rank_file(path_a);
    const auto b = mt2ie::report::read_rank_file(path_b);
    if (tau) *tau = mt2ie::stats::kendall_tau(a, b).value;
    if (rho) *rho = mt2ie::stats::spearman_rho(a, b).value;
  });
}

mt2ie_status mt2ie_kendall_tau(const double* x, const double* y, size_t n, double* out) {
  return guarded([&] {
    need(x, "x");
    need(y, "y");
    need(out, "out");
    *out = mt2ie::stats::kendall_tau_b({x, n}, {y, n});
  });
}

mt2ie_status mt2ie_spearman_rho(const double* x, const double* y, size_t n, double* out) {
  return guarded([&] {
    need(x, "x");
    need(y, "y");
    need(out, "out");
    *out = mt2ie::stats::spearman({x, n}, {y, n});
  });
}

mt2ie_status mt2ie_flesch_kincaid(const char* text, double* out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = mt2ie::ling::flesch_kincaid(text);
  });
}

mt2ie_status mt2ie_yngve_bracketed(const char* tree, double* out) {
  return guarded([&] {
    need(tree, "tree");
    need(out, "out");
    *out = mt2ie::ling::yngve_score(mt2ie::ling::parse_bracketed_tree(tree));
  });
}

mt2ie_status mt2ie_sentence_bleu(const char* candidate, const char* reference, int max_n, double* out) {
  return guarded([&] {
    need(candidate, "candidate");
    need(reference, "reference");
    need(out, "out");
    *out = mt2ie::stats::sentence_bleu(candidate, reference, max_n);
  });
}

}  // extern "C"
