#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/error.hpp"
#include "core/gateway.hpp"
#include "core/lingmetrics.hpp"
#include "core/prompt_engine.hpp"
#include "core/scoring.hpp"

namespace mt2ie::run {

inline constexpr int kSchemaVersion = 1;

enum class Mode { kIterative, kAdaptive, kStatic, kAesthetic };
enum class Scorer { kVqaScore, kVqaAccuracy };
// kAuto weights chains by difficulty in adaptive mode only.
enum class Weighting { kAuto, kOn, kOff };

std::string_view to_string(Mode m);
std::string_view to_string(Scorer s);
std::string_view to_string(Weighting w);
Mode mode_from_string(std::string_view s);
Scorer scorer_from_string(std::string_view s);

inline ModelEndpoint endpoint_of(EndpointKind kind) {
  ModelEndpoint ep;
  ep.kind = kind;
  return ep;
}

struct RunConfig {
  Mode mode = Mode::kIterative;
  int iterations_per_seed = 5;
  int seeds_per_category = 1;
  std::vector<prompt::SeedCategory> categories{prompt::kAllCategories.begin(), prompt::kAllCategories.end()};
  std::uint64_t random_seed = 0;
  int repeat_count = 5;
  Scorer scorer = Scorer::kVqaScore;
  std::string template_set = "llava";
  Weighting weighting = Weighting::kAuto;
  std::vector<std::string> seed_prompts;  // when set, one chain per seed instead of generated seeds
  std::optional<std::vector<std::string>> static_prompts;
  std::optional<int> static_sample_size;
  std::optional<std::string> parser_command;
  int max_tokens = 256;
  std::optional<std::string> image_dir;

  ModelEndpoint mllm = endpoint_of(EndpointKind::kMllm);
  ModelEndpoint t2i = endpoint_of(EndpointKind::kT2i);
  std::optional<ModelEndpoint> lm;

  // Throws Error{kConfig}.
  void validate() const;
  bool weighted() const;
  int chains_per_repeat() const;
};

// Keys follow the JSON layout documented in the README. Unknown keys and
// missing required keys raise Error{kConfig} naming the key.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);
// Auth tokens are never serialized.
nlohmann::json config_to_json(const RunConfig& config);

// Points every configured endpoint at the given mock script.
void apply_mock(RunConfig& config, const std::string& script);

struct Gateways {
  std::shared_ptr<const Gateway> mllm;
  std::shared_ptr<const Gateway> t2i;
  std::shared_ptr<const Gateway> lm;  // optional
};

Gateways make_gateways(const RunConfig& config);

struct IterationRecord {
  int index = 0;
  prompt::PromptText prompt;
  std::string image_hash;  // empty when no image was produced
  std::optional<scoring::ConsistencyScore> score;
  std::optional<scoring::AestheticScore> aesthetic;
  std::vector<scoring::McQuestion> questions;
  ling::DifficultyProfile difficulty;
  std::optional<prompt::BinId> bin_applied;
  std::vector<std::string> warnings;
  int reasks = 0;

  // Consistency value when present, else the aesthetic value.
  std::optional<double> value() const;
  bool operator==(const IterationRecord&) const = default;
};

struct ChainError {
  int iteration = 0;  // index of the iteration that failed
  ErrorCode code = ErrorCode::kTransport;
  std::string message;

  bool operator==(const ChainError&) const = default;
};

struct Chain {
  int id = 0;  // 1-based
  std::string category;
  std::vector<IterationRecord> records;
  std::optional<ChainError> error;
  std::optional<double> final_score;
  std::string weight_basis;  // yngve | word_count | mean | none

  bool operator==(const Chain&) const = default;
};

struct RunLedger {
  int schema_version = kSchemaVersion;
  std::string run_id;
  std::string created_at;
  std::string finished_at;
  int repeat = 0;
  nlohmann::json config;
  std::string mllm_model;
  std::string t2i_model;
  std::string lm_model;
  std::vector<Chain> chains;

  std::size_t record_count() const;
  int failed_chains() const;
  bool operator==(const RunLedger&) const = default;
};

// (sum s_i*d_i) / (sum d_i). A single pair returns its score. Throws
// kPrecondition on length mismatch or empty input and kUndefined when every
// weight is zero.
double weighted_mean(const std::vector<double>& scores, const std::vector<double>& weights);

struct FinalScore {
  std::optional<double> value;
  std::string basis;
};

// Difficulty-weighted score of a chain using yngve weights, or word counts
// when any scored record lacks yngve (or every yngve weight is zero).
// Records without a score are skipped.
FinalScore weighted_final_score(const Chain& chain);
FinalScore unweighted_final_score(const Chain& chain);

std::string utc_now_iso();

// Streams ledger lines as the run progresses. Appends are serialized.
class LedgerWriter {
 public:
  explicit LedgerWriter(const std::string& path);
  explicit LedgerWriter(std::ostream& out);
  ~LedgerWriter();

  void header(const RunLedger& ledger);
  void iteration(const Chain& chain, const IterationRecord& rec);
  void chain_end(const Chain& chain);
  void footer(const RunLedger& ledger);

 private:
  void line(const nlohmann::json& j);

  std::unique_ptr<std::ostream> owned_;
  std::ostream* out_;
  std::mutex mu_;
};

void write_ledger(const RunLedger& ledger, const std::string& path);
void write_ledger(const RunLedger& ledger, std::ostream& out);
// Throws Error{kSchema} naming the offending line for corrupt or truncated
// lines and for schema-version mismatches.
RunLedger read_ledger(const std::string& path);
RunLedger parse_ledger(std::string_view content);

struct RunOptions {
  int repeat = 0;
  LedgerWriter* writer = nullptr;
  std::function<std::string()> clock = utc_now_iso;
};

RunLedger run_iterative(const RunConfig& config, const Gateways& gw, const RunOptions& opts = {});
RunLedger run_adaptive(const RunConfig& config, const Gateways& gw, const RunOptions& opts = {});
// Static and aesthetic modes.
RunLedger run_static(const RunConfig& config, const Gateways& gw, const RunOptions& opts = {});
RunLedger run_once(const RunConfig& config, const Gateways& gw, const RunOptions& opts = {});

// Draws the static prompt sample for a repeat: all prompts in order when no
// sample size is set, else a seeded Fisher-Yates prefix.
std::vector<std::string> sample_static_prompts(const RunConfig& config, int repeat);

// Ledger path for a repeat: `base` unchanged for single-repeat runs, else
// "-r<k>" (1-based) inserted before the extension.
std::string repeat_path(const std::string& base, int repeat, int repeat_count);

std::string make_run_id(const RunConfig& config, int repeat);

}  // namespace mt2ie::run
