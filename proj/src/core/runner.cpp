#include "core/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "core/codec.hpp"
#include "core/templates.hpp"
#include "core/text.hpp"

namespace mt2ie::run {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  fail(ErrorCode::kConfig, "config key '" + key + "': " + what);
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& path) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(path, "has the wrong type");
  }
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) config_error(path.empty() ? "<root>" : path, "must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) config_error(path.empty() ? k : path + "." + k, "unknown key");
  }
}

ModelEndpoint endpoint_from_json(const json& obj, EndpointKind kind, const std::string& path) {
  check_keys(obj, path, {"model_id", "base_url", "timeout", "max_retries", "auth_token", "mock", "retry_backoff"});
  ModelEndpoint ep;
  ep.kind = kind;
  if (!obj.contains("model_id")) config_error(path + ".model_id", "missing");
  ep.model_id = get_as<std::string>(obj, "model_id", path + ".model_id");
  if (obj.contains("mock")) ep.mock_script = get_as<std::string>(obj, "mock", path + ".mock");
  if (obj.contains("base_url")) {
    ep.base_url = get_as<std::string>(obj, "base_url", path + ".base_url");
  } else if (!ep.is_mock()) {
    config_error(path + ".base_url", "missing");
  }
  if (obj.contains("timeout")) {
    const double secs = get_as<double>(obj, "timeout", path + ".timeout");
    if (!(secs > 0)) config_error(path + ".timeout", "must be positive");
    ep.timeout = std::chrono::milliseconds(static_cast<long long>(std::llround(secs * 1000.0)));
  }
  if (obj.contains("retry_backoff")) {
    const double secs = get_as<double>(obj, "retry_backoff", path + ".retry_backoff");
    if (secs < 0) config_error(path + ".retry_backoff", "must be >= 0");
    ep.retry_backoff = std::chrono::milliseconds(static_cast<long long>(std::llround(secs * 1000.0)));
  }
  if (obj.contains("max_retries")) ep.max_retries = get_as<int>(obj, "max_retries", path + ".max_retries");
  if (obj.contains("auth_token")) ep.auth_token = get_as<std::string>(obj, "auth_token", path + ".auth_token");
  try {
    ep.validate();
  } catch (const Error& e) {
    config_error(path, e.what());
  }
  return ep;
}

json endpoint_to_json(const ModelEndpoint& ep) {
  json j = {{"model_id", ep.model_id},
            {"timeout", static_cast<double>(ep.timeout.count()) / 1000.0},
            {"retry_backoff", static_cast<double>(ep.retry_backoff.count()) / 1000.0},
            {"max_retries", ep.max_retries}};
  if (!ep.base_url.empty()) j["base_url"] = ep.base_url;
  if (ep.mock_script) j["mock"] = *ep.mock_script;
  return j;
}

std::int64_t image_seed(const RunConfig& config, int repeat, int chain, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(config.random_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(config.random_seed >> 32), static_cast<std::uint32_t>(repeat),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(index)};
  std::mt19937_64 gen(seq);
  return static_cast<std::int64_t>(gen() >> 1);
}

// Unbiased draw in [0, bound) independent of the standard library's
// distribution implementations.
std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

// ---- ledger (de)serialization -----------------------------------------------

json profile_to_json(const ling::DifficultyProfile& p) {
  json j = {{"word_count", p.word_count},
            {"syllable_count", p.syllable_count},
            {"avg_syllables_per_word", p.avg_syllables_per_word},
            {"avg_word_length", p.avg_word_length},
            {"flesch_kincaid", p.flesch_kincaid},
            {"yngve", p.yngve ? json(*p.yngve) : json(nullptr)},
            {"yngve_approximate", p.yngve_approximate},
            {"perplexity", p.perplexity ? json(*p.perplexity) : json(nullptr)}};
  return j;
}

ling::DifficultyProfile profile_from_json(const json& j) {
  ling::DifficultyProfile p;
  p.word_count = j.at("word_count").get<int>();
  p.syllable_count = j.at("syllable_count").get<int>();
  p.avg_syllables_per_word = j.at("avg_syllables_per_word").get<double>();
  p.avg_word_length = j.at("avg_word_length").get<double>();
  p.flesch_kincaid = j.at("flesch_kincaid").get<double>();
  if (!j.at("yngve").is_null()) p.yngve = j.at("yngve").get<double>();
  p.yngve_approximate = j.at("yngve_approximate").get<bool>();
  if (!j.at("perplexity").is_null()) p.perplexity = j.at("perplexity").get<double>();
  return p;
}

json score_to_json(const scoring::ConsistencyScore& s) {
  json detail = json::array();
  for (const auto& o : s.detail) {
    detail.push_back({{"question", o.question},
                      {"expected", o.expected},
                      {"validated", o.validated},
                      {"given", o.given ? json(*o.given) : json(nullptr)},
                      {"matched", o.matched},
                      {"correct", o.correct}});
  }
  return {{"value", s.value}, {"method", scoring::to_string(s.method)}, {"detail", detail}};
}

scoring::ConsistencyScore score_from_json(const json& j) {
  scoring::ConsistencyScore s;
  s.value = j.at("value").get<double>();
  s.method = scoring::method_from_string(j.at("method").get<std::string>());
  for (const auto& d : j.at("detail")) {
    scoring::QuestionOutcome o;
    o.question = d.at("question").get<std::string>();
    o.expected = d.at("expected").get<std::string>();
    o.validated = d.at("validated").get<bool>();
    if (!d.at("given").is_null()) o.given = d.at("given").get<std::string>();
    o.matched = d.at("matched").get<bool>();
    o.correct = d.at("correct").get<bool>();
    s.detail.push_back(std::move(o));
  }
  return s;
}

json record_to_json(const Chain& chain, const IterationRecord& r) {
  json questions = json::array();
  for (const auto& q : r.questions) {
    questions.push_back({{"question", q.question}, {"choices", q.choices}, {"answer", q.answer}, {"element", q.element}});
  }
  return {{"type", "iteration"},
          {"chain", chain.id},
          {"category", chain.category},
          {"index", r.index},
          {"prompt", r.prompt.text},
          {"parent", r.prompt.parent ? json(*r.prompt.parent) : json(nullptr)},
          {"image_hash", r.image_hash},
          {"score", r.score ? score_to_json(*r.score) : json(nullptr)},
          {"aesthetic", r.aesthetic ? json(r.aesthetic->value) : json(nullptr)},
          {"questions", questions},
          {"difficulty", profile_to_json(r.difficulty)},
          {"bin", r.bin_applied ? json(prompt::to_string(*r.bin_applied)) : json(nullptr)},
          {"warnings", r.warnings},
          {"reasks", r.reasks}};
}

IterationRecord record_from_json(const json& j) {
  IterationRecord r;
  r.index = j.at("index").get<int>();
  r.prompt.text = j.at("prompt").get<std::string>();
  r.prompt.iteration_index = r.index;
  if (!j.at("parent").is_null()) r.prompt.parent = j.at("parent").get<std::string>();
  r.image_hash = j.at("image_hash").get<std::string>();
  if (!j.at("score").is_null()) r.score = score_from_json(j.at("score"));
  if (!j.at("aesthetic").is_null()) r.aesthetic = scoring::AestheticScore{j.at("aesthetic").get<double>()};
  for (const auto& q : j.at("questions")) {
    r.questions.push_back({q.at("question").get<std::string>(), q.at("choices").get<std::vector<std::string>>(),
                           q.at("answer").get<std::string>(), q.at("element").get<std::string>()});
  }
  r.difficulty = profile_from_json(j.at("difficulty"));
  if (!j.at("bin").is_null()) r.bin_applied = prompt::bin_from_string(j.at("bin").get<std::string>());
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.reasks = j.at("reasks").get<int>();
  return r;
}

json header_to_json(const RunLedger& l) {
  return {{"type", "header"},
          {"schema_version", l.schema_version},
          {"run_id", l.run_id},
          {"created_at", l.created_at},
          {"repeat", l.repeat},
          {"models", {{"mllm", l.mllm_model}, {"t2i", l.t2i_model}, {"lm", l.lm_model}}},
          {"config", l.config}};
}

json error_to_json(const Chain& c) {
  return {{"type", "error"},
          {"chain", c.id},
          {"iteration", c.error->iteration},
          {"code", to_string(c.error->code)},
          {"message", c.error->message}};
}

json chain_to_json(const Chain& c) {
  return {{"type", "chain"},
          {"chain", c.id},
          {"category", c.category},
          {"records", c.records.size()},
          {"truncated", c.error.has_value()},
          {"final_score", c.final_score ? json(*c.final_score) : json(nullptr)},
          {"weight_basis", c.weight_basis}};
}

// ---- chain execution --------------------------------------------------------

class ChainRunner {
 public:
  ChainRunner(const RunConfig& config, const Gateways& gw, const RunOptions& opts)
      : config_(config), gw_(gw), opts_(opts) {
    if (config.parser_command) parser_.emplace(*config.parser_command);
  }

  DecodingParams generation_params() const {
    DecodingParams p;
    p.max_tokens = config_.max_tokens;
    return p;
  }

  // Generates the image, scores it and profiles the prompt.
  IterationRecord evaluate(int chain_id, const prompt::PromptText& p, const std::string& run_id) {
    IterationRecord rec;
    rec.index = p.iteration_index;
    rec.prompt = p;
    rec.difficulty = profile(p.text, rec.warnings);
    ImageArtifact image;
    try {
      image = gw_.t2i->generate_image(p.text, image_seed(config_, opts_.repeat, chain_id, p.iteration_index));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSafetyRefusal) throw;
      rec.warnings.push_back(std::string("safety-refusal: ") + e.what());
      return rec;
    }
    rec.image_hash = image.content_hash;
    if (config_.image_dir) {
      std::filesystem::create_directories(*config_.image_dir);
      write_file_bytes(fmt::format("{}/{}-c{}-i{}.png", *config_.image_dir, run_id, chain_id, p.iteration_index),
                       image.bytes);
    }
    if (config_.mode == Mode::kAesthetic) {
      rec.aesthetic = scoring::aesthetic_score(*gw_.mllm, image);
    } else if (config_.scorer == Scorer::kVqaScore) {
      rec.score = scoring::vqascore(*gw_.mllm, image, p.text);
    } else {
      auto parsed = scoring::generate_questions(*gw_.mllm, p.text, config_.template_set);
      if (parsed.warnings > 0) {
        rec.warnings.push_back(fmt::format("dropped {} malformed question block(s)", parsed.warnings));
      }
      rec.questions = parsed.questions;
      rec.score = scoring::vqa_accuracy(*gw_.mllm, image, p.text, parsed.questions, config_.template_set);
    }
    return rec;
  }

  void finish(Chain& chain) {
    const auto fs = config_.weighted() ? weighted_final_score(chain) : unweighted_final_score(chain);
    chain.final_score = fs.value;
    chain.weight_basis = fs.basis;
    if (opts_.writer) opts_.writer->chain_end(chain);
  }

  void append(Chain& chain, IterationRecord rec) {
    chain.records.push_back(std::move(rec));
    if (opts_.writer) opts_.writer->iteration(chain, chain.records.back());
  }

  void record_error(Chain& chain, int iteration, const Error& e) {
    chain.error = ChainError{iteration, e.code(), e.what()};
  }

  const RunConfig& config() const { return config_; }
  const Gateways& gateways() const { return gw_; }

 private:
  ling::DifficultyProfile profile(const std::string& text, std::vector<std::string>& warnings) {
    std::optional<ling::ConstituencyTree> tree;
    if (parser_) {
      try {
        tree = parser_->parse({text}).front();
      } catch (const Error& e) {
        warnings.push_back(std::string("parser failed, using fallback tree: ") + e.what());
      }
    }
    return ling::difficulty_profile_with_fallback(text, tree ? &*tree : nullptr, gw_.lm.get());
  }

  const RunConfig& config_;
  const Gateways& gw_;
  const RunOptions& opts_;
  std::optional<ling::ExternalParser> parser_;
};

struct ChainSeed {
  std::string category;
  std::optional<std::string> text;
  std::optional<Error> error;
};

std::vector<ChainSeed> chain_seeds(const RunConfig& config, const Gateways& gw, const DecodingParams& params) {
  std::vector<ChainSeed> out;
  if (!config.seed_prompts.empty()) {
    for (const auto& s : config.seed_prompts) out.push_back({"user", s, std::nullopt});
    return out;
  }
  for (auto cat : config.categories) {
    const std::string name(prompt::to_string(cat));
    try {
      for (auto& g : prompt::make_seed_prompts(*gw.mllm, cat, config.seeds_per_category, params)) {
        out.push_back({name, std::move(g.prompt.text), std::nullopt});
      }
    } catch (const Error& e) {
      for (int i = 0; i < config.seeds_per_category; ++i) out.push_back({name, std::nullopt, e});
    }
  }
  return out;
}

RunLedger begin_ledger(const RunConfig& config, const RunOptions& opts) {
  RunLedger l;
  l.run_id = make_run_id(config, opts.repeat);
  l.created_at = opts.clock();
  l.repeat = opts.repeat;
  l.config = config_to_json(config);
  l.mllm_model = config.mllm.model_id;
  l.t2i_model = config.t2i.model_id;
  l.lm_model = config.lm ? config.lm->model_id : "";
  if (opts.writer) opts.writer->header(l);
  return l;
}

void end_ledger(RunLedger& l, const RunOptions& opts) {
  l.finished_at = opts.clock();
  if (opts.writer) opts.writer->footer(l);
}

RunLedger run_chained(const RunConfig& config, const Gateways& gw, const RunOptions& opts, bool adaptive) {
  RunLedger ledger = begin_ledger(config, opts);
  ChainRunner runner(config, gw, opts);
  const auto params = runner.generation_params();
  int chain_id = 0;
  for (const auto& seed : chain_seeds(config, gw, params)) {
    Chain chain;
    chain.id = ++chain_id;
    chain.category = seed.category;
    if (seed.error) {
      runner.record_error(chain, 0, *seed.error);
    } else {
      prompt::PromptText current = prompt::PromptText::seed(*seed.text);
      std::optional<prompt::BinId> bin;
      int reasks = 0;
      for (int i = 0; i < config.iterations_per_seed; ++i) {
        try {
          if (i > 0) {
            const auto& prev = chain.records.back();
            if (adaptive) {
              auto g = prompt::next_prompt_adaptive(*gw.mllm, prev.prompt, prev.value().value(), params);
              current = std::move(g.prompt);
              bin = g.bin.id;
              reasks = g.reasks;
            } else {
              auto g = prompt::next_prompt_iterative(*gw.mllm, prev.prompt, params);
              current = std::move(g.prompt);
              reasks = g.reasks;
            }
          }
          auto rec = runner.evaluate(chain.id, current, ledger.run_id);
          rec.bin_applied = bin;
          rec.reasks = reasks;
          const bool refused = !rec.value().has_value();
          runner.append(chain, std::move(rec));
          if (refused && adaptive) {
            chain.error = ChainError{i, ErrorCode::kSafetyRefusal, "image refused; adaptive chain cannot continue"};
            break;
          }
        } catch (const Error& e) {
          runner.record_error(chain, i, e);
          break;
        }
      }
    }
    runner.finish(chain);
    ledger.chains.push_back(std::move(chain));
  }
  end_ledger(ledger, opts);
  return ledger;
}

}  // namespace

// ---- enums ------------------------------------------------------------------

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kIterative: return "iterative";
    case Mode::kAdaptive: return "adaptive";
    case Mode::kStatic: return "static";
    case Mode::kAesthetic: return "aesthetic";
  }
  return "iterative";
}

std::string_view to_string(Scorer s) { return s == Scorer::kVqaScore ? "vqascore" : "vqa-accuracy"; }

std::string_view to_string(Weighting w) {
  switch (w) {
    case Weighting::kAuto: return "auto";
    case Weighting::kOn: return "on";
    case Weighting::kOff: return "off";
  }
  return "auto";
}

Mode mode_from_string(std::string_view s) {
  for (auto m : {Mode::kIterative, Mode::kAdaptive, Mode::kStatic, Mode::kAesthetic}) {
    if (to_string(m) == s) return m;
  }
  fail(ErrorCode::kConfig, "unknown mode: " + std::string(s));
}

Scorer scorer_from_string(std::string_view s) {
  for (auto m : {Scorer::kVqaScore, Scorer::kVqaAccuracy}) {
    if (to_string(m) == s) return m;
  }
  fail(ErrorCode::kConfig, "unknown scorer: " + std::string(s));
}

// ---- config -----------------------------------------------------------------

void RunConfig::validate() const {
  if (iterations_per_seed < 1) config_error("iterations_per_seed", "must be >= 1");
  if (seeds_per_category < 1) config_error("seeds_per_category", "must be >= 1");
  if (repeat_count < 1) config_error("repeat_count", "must be >= 1");
  if (max_tokens < 1) config_error("max_tokens", "must be >= 1");
  if (categories.empty() && seed_prompts.empty() && mode != Mode::kStatic) {
    config_error("categories", "must name at least one category");
  }
  if (mode == Mode::kStatic && (!static_prompts || static_prompts->empty())) {
    config_error("static_prompts", "required and nonempty in static mode");
  }
  if (static_sample_size && *static_sample_size < 1) config_error("static_sample_size", "must be >= 1");
  for (const auto& s : seed_prompts) {
    if (text::trim(s).empty()) config_error("seed_prompts", "entries must be nonempty");
  }
  if (static_prompts) {
    for (const auto& s : *static_prompts) {
      if (text::trim(s).empty()) config_error("static_prompts", "entries must be nonempty");
    }
  }
  try {
    (void)templates::question_set(template_set);
  } catch (const Error& e) {
    config_error("template_set", e.what());
  }
}

bool RunConfig::weighted() const {
  switch (weighting) {
    case Weighting::kOn: return true;
    case Weighting::kOff: return false;
    case Weighting::kAuto: return mode == Mode::kAdaptive;
  }
  return false;
}

int RunConfig::chains_per_repeat() const {
  if (mode == Mode::kStatic) return 1;
  if (!seed_prompts.empty()) return static_cast<int>(seed_prompts.size());
  return static_cast<int>(categories.size()) * seeds_per_category;
}

RunConfig config_from_json(const json& doc) {
  check_keys(doc, "",
             {"mode", "iterations_per_seed", "seeds_per_category", "categories", "random_seed", "repeat_count",
              "scorer", "template_set", "weighting", "seed_prompts", "static_prompts", "static_sample_size",
              "parser_command", "max_tokens", "image_dir", "endpoints"});
  RunConfig c;
  if (doc.contains("mode")) c.mode = mode_from_string(get_as<std::string>(doc, "mode", "mode"));
  if (doc.contains("iterations_per_seed")) c.iterations_per_seed = get_as<int>(doc, "iterations_per_seed", "iterations_per_seed");
  if (doc.contains("seeds_per_category")) c.seeds_per_category = get_as<int>(doc, "seeds_per_category", "seeds_per_category");
  if (doc.contains("categories")) {
    c.categories.clear();
    for (const auto& name : get_as<std::vector<std::string>>(doc, "categories", "categories")) {
      try {
        c.categories.push_back(prompt::category_from_string(name));
      } catch (const Error&) {
        config_error("categories", "unknown category '" + name + "'");
      }
    }
  }
  if (doc.contains("random_seed")) c.random_seed = get_as<std::uint64_t>(doc, "random_seed", "random_seed");
  if (doc.contains("repeat_count")) c.repeat_count = get_as<int>(doc, "repeat_count", "repeat_count");
  if (doc.contains("scorer")) c.scorer = scorer_from_string(get_as<std::string>(doc, "scorer", "scorer"));
  if (doc.contains("template_set")) c.template_set = get_as<std::string>(doc, "template_set", "template_set");
  if (doc.contains("weighting")) {
    const auto w = get_as<std::string>(doc, "weighting", "weighting");
    if (w == "auto") c.weighting = Weighting::kAuto;
    else if (w == "on") c.weighting = Weighting::kOn;
    else if (w == "off") c.weighting = Weighting::kOff;
    else config_error("weighting", "must be auto, on or off");
  }
  if (doc.contains("seed_prompts")) c.seed_prompts = get_as<std::vector<std::string>>(doc, "seed_prompts", "seed_prompts");
  if (doc.contains("static_prompts")) {
    c.static_prompts = get_as<std::vector<std::string>>(doc, "static_prompts", "static_prompts");
  }
  if (doc.contains("static_sample_size")) {
    c.static_sample_size = get_as<int>(doc, "static_sample_size", "static_sample_size");
  }
  if (doc.contains("parser_command")) c.parser_command = get_as<std::string>(doc, "parser_command", "parser_command");
  if (doc.contains("max_tokens")) c.max_tokens = get_as<int>(doc, "max_tokens", "max_tokens");
  if (doc.contains("image_dir")) c.image_dir = get_as<std::string>(doc, "image_dir", "image_dir");

  if (!doc.contains("endpoints")) config_error("endpoints", "missing");
  const auto& eps = doc.at("endpoints");
  check_keys(eps, "endpoints", {"mllm", "t2i", "lm"});
  if (!eps.contains("mllm")) config_error("endpoints.mllm", "missing");
  if (!eps.contains("t2i")) config_error("endpoints.t2i", "missing");
  c.mllm = endpoint_from_json(eps.at("mllm"), EndpointKind::kMllm, "endpoints.mllm");
  c.t2i = endpoint_from_json(eps.at("t2i"), EndpointKind::kT2i, "endpoints.t2i");
  if (eps.contains("lm")) c.lm = endpoint_from_json(eps.at("lm"), EndpointKind::kLm, "endpoints.lm");
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::kConfig, "cannot read config file " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, "config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

json config_to_json(const RunConfig& c) {
  std::vector<std::string> cats;
  for (auto cat : c.categories) cats.emplace_back(prompt::to_string(cat));
  json j = {{"mode", to_string(c.mode)},
            {"iterations_per_seed", c.iterations_per_seed},
            {"seeds_per_category", c.seeds_per_category},
            {"categories", cats},
            {"random_seed", c.random_seed},
            {"repeat_count", c.repeat_count},
            {"scorer", to_string(c.scorer)},
            {"template_set", c.template_set},
            {"weighting", to_string(c.weighting)},
            {"max_tokens", c.max_tokens}};
  if (!c.seed_prompts.empty()) j["seed_prompts"] = c.seed_prompts;
  if (c.static_prompts) j["static_prompts"] = *c.static_prompts;
  if (c.static_sample_size) j["static_sample_size"] = *c.static_sample_size;
  if (c.parser_command) j["parser_command"] = *c.parser_command;
  if (c.image_dir) j["image_dir"] = *c.image_dir;
  j["endpoints"] = {{"mllm", endpoint_to_json(c.mllm)}, {"t2i", endpoint_to_json(c.t2i)}};
  if (c.lm) j["endpoints"]["lm"] = endpoint_to_json(*c.lm);
  return j;
}

void apply_mock(RunConfig& config, const std::string& script) {
  config.mllm.mock_script = script;
  config.t2i.mock_script = script;
  if (config.lm) config.lm->mock_script = script;
}

Gateways make_gateways(const RunConfig& config) {
  Gateways g;
  g.mllm = make_gateway(config.mllm);
  g.t2i = make_gateway(config.t2i);
  if (config.lm) g.lm = make_gateway(*config.lm);
  return g;
}

// ---- records and final scores -----------------------------------------------

std::optional<double> IterationRecord::value() const {
  if (score) return score->value;
  if (aesthetic) return aesthetic->value;
  return std::nullopt;
}

std::size_t RunLedger::record_count() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.records.size();
  return n;
}

int RunLedger::failed_chains() const {
  return static_cast<int>(std::count_if(chains.begin(), chains.end(), [](const Chain& c) { return c.error.has_value(); }));
}

double weighted_mean(const std::vector<double>& scores, const std::vector<double>& weights) {
  require(!scores.empty(), "weighted_mean requires scores");
  require(scores.size() == weights.size(), "scores and weights differ in length");
  if (scores.size() == 1) return scores.front();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(weights[i] >= 0.0, "weights must be non-negative");
    num += scores[i] * weights[i];
    den += weights[i];
  }
  if (den <= 0.0) fail(ErrorCode::kUndefined, "all difficulty weights are zero");
  const double lo = *std::min_element(scores.begin(), scores.end());
  const double hi = *std::max_element(scores.begin(), scores.end());
  return std::clamp(num / den, lo, hi);
}

FinalScore weighted_final_score(const Chain& chain) {
  std::vector<double> scores, yngve, words;
  bool have_yngve = true;
  for (const auto& r : chain.records) {
    const auto v = r.value();
    if (!v) continue;
    scores.push_back(*v);
    words.push_back(r.difficulty.word_count);
    if (r.difficulty.yngve) {
      yngve.push_back(*r.difficulty.yngve);
    } else {
      have_yngve = false;
    }
  }
  if (scores.empty()) return {std::nullopt, "none"};
  if (have_yngve) {
    try {
      return {weighted_mean(scores, yngve), "yngve"};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefined) throw;
    }
  }
  return {weighted_mean(scores, words), "word_count"};
}

FinalScore unweighted_final_score(const Chain& chain) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : chain.records) {
    if (auto v = r.value()) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return {std::nullopt, "none"};
  return {sum / n, "mean"};
}

std::string utc_now_iso() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- ledger I/O -------------------------------------------------------------

LedgerWriter::LedgerWriter(const std::string& path)
    : owned_(std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc)), out_(owned_.get()) {
  if (!*out_) fail(ErrorCode::kIo, "cannot write ledger " + path);
}

LedgerWriter::LedgerWriter(std::ostream& out) : out_(&out) {}

LedgerWriter::~LedgerWriter() = default;

void LedgerWriter::line(const json& j) {
  std::lock_guard lock(mu_);
  *out_ << j.dump() << '\n';
  out_->flush();
  if (!*out_) fail(ErrorCode::kIo, "ledger write failed");
}

void LedgerWriter::header(const RunLedger& l) { line(header_to_json(l)); }

void LedgerWriter::iteration(const Chain& chain, const IterationRecord& rec) { line(record_to_json(chain, rec)); }

void LedgerWriter::chain_end(const Chain& chain) {
  if (chain.error) line(error_to_json(chain));
  line(chain_to_json(chain));
}

void LedgerWriter::footer(const RunLedger& l) { line({{"type", "footer"}, {"finished_at", l.finished_at}}); }

void write_ledger(const RunLedger& ledger, std::ostream& out) {
  LedgerWriter w(out);
  w.header(ledger);
  for (const auto& c : ledger.chains) {
    for (const auto& r : c.records) w.iteration(c, r);
    w.chain_end(c);
  }
  w.footer(ledger);
}

void write_ledger(const RunLedger& ledger, const std::string& path) {
  std::ostringstream buf;
  write_ledger(ledger, buf);
  const auto s = buf.str();
  write_file_bytes(path, Bytes(s.begin(), s.end()));
}

RunLedger parse_ledger(std::string_view content) {
  RunLedger l;
  bool have_header = false;
  bool have_footer = false;
  Chain* open = nullptr;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto at_line = [&](const std::string& what) -> Error {
    return Error(ErrorCode::kSchema, fmt::format("ledger line {}: {}", line_no, what));
  };
  auto chain_for = [&](int id, const std::string& category) -> Chain& {
    if (!open || open->id != id) {
      for (const auto& c : l.chains) {
        if (c.id == id) throw at_line(fmt::format("chain {} reopened", id));
      }
      l.chains.push_back(Chain{id, category, {}, std::nullopt, std::nullopt, ""});
      open = &l.chains.back();
    }
    return *open;
  };
  while (pos < content.size()) {
    ++line_no;
    const auto nl = content.find('\n', pos);
    if (nl == std::string_view::npos) throw at_line("truncated record (no line terminator)");
    const auto raw = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (text::trim(raw).empty()) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error&) {
      throw at_line("corrupt record");
    }
    try {
      const auto type = j.at("type").get<std::string>();
      if (!have_header && type != "header") throw at_line("expected header record");
      if (have_footer) throw at_line("record after footer");
      if (type == "header") {
        if (have_header) throw at_line("duplicate header");
        l.schema_version = j.at("schema_version").get<int>();
        if (l.schema_version != kSchemaVersion) {
          throw at_line(fmt::format("schema version {} is not supported (expected {})", l.schema_version, kSchemaVersion));
        }
        l.run_id = j.at("run_id").get<std::string>();
        l.created_at = j.at("created_at").get<std::string>();
        l.repeat = j.at("repeat").get<int>();
        l.mllm_model = j.at("models").at("mllm").get<std::string>();
        l.t2i_model = j.at("models").at("t2i").get<std::string>();
        l.lm_model = j.at("models").at("lm").get<std::string>();
        l.config = j.at("config");
        have_header = true;
      } else if (type == "iteration") {
        auto& c = chain_for(j.at("chain").get<int>(), j.at("category").get<std::string>());
        if (c.error) throw at_line("iteration after chain error");
        c.records.push_back(record_from_json(j));
      } else if (type == "error") {
        auto& c = chain_for(j.at("chain").get<int>(), "");
        auto code = error_code_from_string(j.at("code").get<std::string>());
        if (!code) throw at_line("unknown error code");
        c.error = ChainError{j.at("iteration").get<int>(), *code, j.at("message").get<std::string>()};
      } else if (type == "chain") {
        auto& c = chain_for(j.at("chain").get<int>(), j.at("category").get<std::string>());
        c.category = j.at("category").get<std::string>();
        if (j.at("records").get<std::size_t>() != c.records.size()) throw at_line("chain record count mismatch");
        if (!j.at("final_score").is_null()) c.final_score = j.at("final_score").get<double>();
        c.weight_basis = j.at("weight_basis").get<std::string>();
        open = nullptr;
      } else if (type == "footer") {
        l.finished_at = j.at("finished_at").get<std::string>();
        have_footer = true;
      } else {
        throw at_line("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw at_line(std::string("malformed record: ") + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kSchema) throw;
      throw at_line(e.what());
    }
  }
  if (!have_header) fail(ErrorCode::kSchema, "ledger has no header");
  return l;
}

RunLedger read_ledger(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return parse_ledger(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---- runs -------------------------------------------------------------------

RunLedger run_iterative(const RunConfig& config, const Gateways& gw, const RunOptions& opts) {
  require(config.mode == Mode::kIterative, "run_iterative requires mode=iterative");
  return run_chained(config, gw, opts, false);
}

RunLedger run_adaptive(const RunConfig& config, const Gateways& gw, const RunOptions& opts) {
  require(config.mode == Mode::kAdaptive, "run_adaptive requires mode=adaptive");
  return run_chained(config, gw, opts, true);
}

std::vector<std::string> sample_static_prompts(const RunConfig& config, int repeat) {
  require(config.static_prompts && !config.static_prompts->empty(), "static run requires prompts");
  auto prompts = *config.static_prompts;
  if (!config.static_sample_size || *config.static_sample_size >= static_cast<int>(prompts.size())) return prompts;
  std::seed_seq seq{static_cast<std::uint32_t>(config.random_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(config.random_seed >> 32), static_cast<std::uint32_t>(repeat)};
  std::mt19937_64 gen(seq);
  const auto k = static_cast<std::size_t>(*config.static_sample_size);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + bounded(gen, prompts.size() - i);
    std::swap(prompts[i], prompts[j]);
  }
  prompts.resize(k);
  return prompts;
}

RunLedger run_static(const RunConfig& config, const Gateways& gw, const RunOptions& opts) {
  require(config.mode == Mode::kStatic || config.mode == Mode::kAesthetic,
          "run_static requires mode=static or mode=aesthetic");
  RunLedger ledger = begin_ledger(config, opts);
  ChainRunner runner(config, gw, opts);

  std::vector<ChainSeed> items;
  if (config.static_prompts) {
    for (auto& p : sample_static_prompts(config, opts.repeat)) items.push_back({"static", std::move(p), std::nullopt});
  } else {
    items = chain_seeds(config, gw, runner.generation_params());
  }
  // Each prompt is scored independently as a one-record chain.
  int chain_id = 0;
  for (const auto& item : items) {
    Chain chain;
    chain.id = ++chain_id;
    chain.category = item.category;
    if (item.error) {
      runner.record_error(chain, 0, *item.error);
    } else {
      try {
        runner.append(chain, runner.evaluate(chain.id, prompt::PromptText::seed(*item.text), ledger.run_id));
      } catch (const Error& e) {
        runner.record_error(chain, 0, e);
      }
    }
    runner.finish(chain);
    ledger.chains.push_back(std::move(chain));
  }
  end_ledger(ledger, opts);
  return ledger;
}

RunLedger run_once(const RunConfig& config, const Gateways& gw, const RunOptions& opts) {
  switch (config.mode) {
    case Mode::kIterative: return run_iterative(config, gw, opts);
    case Mode::kAdaptive: return run_adaptive(config, gw, opts);
    case Mode::kStatic:
    case Mode::kAesthetic: return run_static(config, gw, opts);
  }
  fail(ErrorCode::kConfig, "unknown mode");
}

std::string repeat_path(const std::string& base, int repeat, int repeat_count) {
  if (repeat_count <= 1) return base;
  const std::filesystem::path p(base);
  auto name = p.stem().string() + "-r" + std::to_string(repeat + 1) + p.extension().string();
  return (p.parent_path() / name).string();
}

std::string make_run_id(const RunConfig& config, int repeat) {
  return sha256_hex(config_to_json(config).dump() + "#" + std::to_string(repeat)).substr(0, 16);
}

}  // namespace mt2ie::run
