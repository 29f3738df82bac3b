#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/runner.hpp"
#include "core/stats.hpp"

namespace mt2ie::report {

struct ModelSummary {
  std::string model;
  stats::MeanStd score;  // over repeats
  int repeats = 0;
  double rank = 0.0;
};

struct SeriesPoint {
  int iteration = 0;
  double mean = 0.0;
  std::optional<double> std;
  int n = 0;
};

struct Series {
  std::string name;
  std::vector<SeriesPoint> points;
};

struct Report {
  std::vector<ModelSummary> models;
  stats::RankVector ranking;
  std::optional<stats::CorrelationResult> tau;
  std::optional<stats::CorrelationResult> rho;
  std::vector<Series> score_vs_iteration;
  std::string difficulty_metric;  // metric drawn in the difficulty chart
  std::vector<Series> difficulty_vs_iteration;
  // All metric columns per model, long form.
  std::vector<std::pair<std::string, Series>> difficulty_table;
  std::vector<stats::MetricCorrelation> metric_correlation;
};

// Mean of the chain final scores. Throws kUndefined when no chain has one.
double ledger_score(const run::RunLedger& ledger);

// Groups ledgers by T2I model. Throws kPrecondition when ledgers mix judges
// or modes, or when models were run a different number of times.
Report build_report(const std::vector<run::RunLedger>& ledgers,
                    const std::optional<stats::RankVector>& reference = std::nullopt);

// score_vs_iteration.{tsv,svg}, difficulty_vs_iteration.{tsv,svg},
// metric_correlation.tsv. Returns the written paths.
std::vector<std::string> write_analysis(const Report& report, const std::string& out_dir);
// summary.tsv, ranking.tsv and, with a reference, rank_correlation.tsv.
std::vector<std::string> write_ranking(const Report& report, const std::string& out_dir);

// Rank files: one "model<TAB>score" per line; blank lines and lines starting
// with '#' are ignored. Throws kParse naming the line.
stats::RankVector parse_rank_file(std::string_view content);
stats::RankVector read_rank_file(const std::string& path);
std::string format_rank_file(const stats::RankVector& ranking);

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

}  // namespace mt2ie::report
