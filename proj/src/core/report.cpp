#include "core/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "core/codec.hpp"
#include "core/text.hpp"

namespace mt2ie::report {

namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) { return fmt::format("{:.6g}", v); }

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

void save(const std::string& path, const std::string& content, std::vector<std::string>& written) {
  write_file_bytes(path, Bytes(content.begin(), content.end()));
  written.push_back(path);
}

Series to_series(const std::string& name, const std::map<int, std::vector<double>>& by_iter) {
  Series s{name, {}};
  for (const auto& [it, values] : by_iter) {
    const auto ms = stats::mean_std(values);
    s.points.push_back({it, ms.mean, ms.std, static_cast<int>(values.size())});
  }
  return s;
}

std::string series_tsv(const std::string& value_header, const std::vector<Series>& series) {
  std::string out = fmt::format("model\titeration\t{}\tstd\tn\n", value_header);
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      out += fmt::format("{}\t{}\t{}\t{}\t{}\n", s.name, p.iteration, num(p.mean), p.std ? num(*p.std) : "", p.n);
    }
  }
  return out;
}

}  // namespace

double ledger_score(const run::RunLedger& ledger) {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : ledger.chains) {
    if (c.final_score) {
      sum += *c.final_score;
      ++n;
    }
  }
  if (n == 0) fail(ErrorCode::kUndefined, "ledger " + ledger.run_id + " has no chain with a final score");
  return sum / n;
}

Report build_report(const std::vector<run::RunLedger>& ledgers, const std::optional<stats::RankVector>& reference) {
  require(!ledgers.empty(), "report requires at least one ledger");
  const auto& first = ledgers.front();
  const auto mode = first.config.value("mode", std::string());
  std::map<std::string, std::vector<const run::RunLedger*>> by_model;
  for (const auto& l : ledgers) {
    require(l.mllm_model == first.mllm_model,
            "inconsistent ledgers: judge models differ (" + first.mllm_model + " vs " + l.mllm_model + ")");
    require(l.config.value("mode", std::string()) == mode, "inconsistent ledgers: run modes differ");
    by_model[l.t2i_model].push_back(&l);
  }
  const auto repeats = by_model.begin()->second.size();
  for (const auto& [model, ls] : by_model) {
    require(ls.size() == repeats, "inconsistent model sets across ledgers: model '" + model + "' has " +
                                      std::to_string(ls.size()) + " ledgers, expected " + std::to_string(repeats));
  }

  Report r;
  std::map<std::string, std::vector<double>> scores;
  for (const auto& [model, ls] : by_model) {
    for (const auto* l : ls) scores[model].push_back(ledger_score(*l));
  }
  r.ranking = stats::rank_models(scores);
  for (const auto& [model, values] : scores) {
    r.models.push_back({model, stats::mean_std(values), static_cast<int>(values.size()), *r.ranking.rank_of(model)});
  }
  if (reference) {
    r.tau = stats::kendall_tau(r.ranking, *reference);
    r.rho = stats::spearman_rho(r.ranking, *reference);
  }

  bool all_yngve = true;
  std::vector<ling::DifficultyProfile> profiles;
  std::vector<double> values;
  for (const auto& [model, ls] : by_model) {
    for (const auto* l : ls) {
      for (const auto& c : l->chains) {
        for (const auto& rec : c.records) {
          all_yngve = all_yngve && rec.difficulty.yngve.has_value();
          if (auto v = rec.value()) {
            profiles.push_back(rec.difficulty);
            values.push_back(*v);
          }
        }
      }
    }
  }
  r.difficulty_metric = all_yngve ? "yngve" : "word_count";

  for (const auto& [model, ls] : by_model) {
    std::map<int, std::vector<double>> score_by_iter, diff_by_iter;
    std::map<std::string, std::map<int, std::vector<double>>> metric_by_iter;
    for (const auto* l : ls) {
      for (const auto& c : l->chains) {
        for (const auto& rec : c.records) {
          if (auto v = rec.value()) score_by_iter[rec.index].push_back(*v);
          for (const auto& m : stats::metric_names()) {
            if (auto v = stats::metric_value(rec.difficulty, m)) metric_by_iter[m][rec.index].push_back(*v);
          }
          diff_by_iter[rec.index].push_back(stats::metric_value(rec.difficulty, r.difficulty_metric).value_or(0.0));
        }
      }
    }
    r.score_vs_iteration.push_back(to_series(model, score_by_iter));
    r.difficulty_vs_iteration.push_back(to_series(model, diff_by_iter));
    for (const auto& m : stats::metric_names()) {
      if (metric_by_iter.count(m)) r.difficulty_table.emplace_back(m, to_series(model, metric_by_iter[m]));
    }
  }

  if (profiles.size() >= 2) r.metric_correlation = stats::metric_score_correlation(profiles, values);
  return r;
}

std::vector<std::string> write_analysis(const Report& r, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  save(out_dir + "/score_vs_iteration.tsv", series_tsv("mean_score", r.score_vs_iteration), written);

  std::string diff = "model\tmetric\titeration\tmean\tstd\tn\n";
  for (const auto& [metric, s] : r.difficulty_table) {
    for (const auto& p : s.points) {
      diff += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", s.name, metric, p.iteration, num(p.mean),
                          p.std ? num(*p.std) : "", p.n);
    }
  }
  save(out_dir + "/difficulty_vs_iteration.tsv", diff, written);

  std::string corr = "metric\tkendall_tau\tspearman_rho\tn\n";
  for (const auto& m : r.metric_correlation) {
    corr += fmt::format("{}\t{}\t{}\t{}\n", m.metric, num(m.tau.value), num(m.rho.value), m.tau.n);
  }
  save(out_dir + "/metric_correlation.tsv", corr, written);

  save(out_dir + "/score_vs_iteration.svg",
       line_chart_svg("Score vs. iteration", "iteration", "score", r.score_vs_iteration), written);
  save(out_dir + "/difficulty_vs_iteration.svg",
       line_chart_svg("Difficulty vs. iteration", "iteration", r.difficulty_metric, r.difficulty_vs_iteration),
       written);
  return written;
}

std::vector<std::string> write_ranking(const Report& r, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  std::string summary = "model\tmean\tstd\trepeats\trank\n";
  for (const auto& m : r.models) {
    summary += fmt::format("{}\t{}\t{}\t{}\t{}\n", m.model, num(m.score.mean), m.score.std ? num(*m.score.std) : "",
                           m.repeats, num(m.rank));
  }
  save(out_dir + "/summary.tsv", summary, written);
  save(out_dir + "/ranking.tsv", format_rank_file(r.ranking), written);
  if (r.tau && r.rho) {
    save(out_dir + "/rank_correlation.tsv",
         fmt::format("statistic\tvalue\tn\nkendall-tau\t{}\t{}\nspearman-rho\t{}\t{}\n", num(r.tau->value), r.tau->n,
                     num(r.rho->value), r.rho->n),
         written);
  }
  return written;
}

stats::RankVector parse_rank_file(std::string_view content) {
  std::vector<std::pair<std::string, double>> entries;
  int line_no = 0;
  for (const auto& raw : text::split_lines(content)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto sep = line.find('\t');
    if (sep == std::string_view::npos) sep = line.find_last_of(' ');
    if (sep == std::string_view::npos) fail(ErrorCode::kParse, fmt::format("rank file line {}: expected model and score", line_no));
    const std::string id(text::trim(line.substr(0, sep)));
    const std::string value(text::trim(line.substr(sep + 1)));
    double score;
    try {
      std::size_t used = 0;
      score = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      fail(ErrorCode::kParse, fmt::format("rank file line {}: '{}' is not a number", line_no, value));
    }
    if (id.empty()) fail(ErrorCode::kParse, fmt::format("rank file line {}: empty model id", line_no));
    entries.emplace_back(id, score);
  }
  if (entries.empty()) fail(ErrorCode::kParse, "rank file has no entries");
  try {
    return stats::RankVector(std::move(entries));
  } catch (const Error& e) {
    fail(ErrorCode::kParse, std::string("rank file: ") + e.what());
  }
}

stats::RankVector read_rank_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return parse_rank_file(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string format_rank_file(const stats::RankVector& ranking) {
  std::string out = "# model\tscore\n";
  for (const auto& [id, score] : ranking.entries()) out += fmt::format("{}\t{:.17g}\n", id, score);
  return out;
}

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  constexpr double kW = 640, kH = 400, kLeft = 64, kRight = 150, kTop = 40, kBottom = 52;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      xmin = std::min(xmin, double(p.iteration));
      xmax = std::max(xmax, double(p.iteration));
      ymin = std::min(ymin, p.mean);
      ymax = std::max(ymax, p.mean);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pad = (ymax - ymin) * 0.05;
  ymin -= pad;
  ymax += pad;
  auto sx = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return kTop + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{3}</text>\n",
      kW, kH, kLeft + pw / 2, xml_escape(title));
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft, kTop + ph,
                     kLeft + pw);
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop, kTop + ph);
  for (int x = static_cast<int>(std::ceil(xmin)); x <= static_cast<int>(std::floor(xmax)); ++x) {
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", sx(x), kTop + ph + 16, x);
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", kLeft - 6, sy(y) + 4, y);
    out += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", kLeft,
                       sy(y), kLeft + pw, sy(y));
  }
  out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, kH - 12,
                     xml_escape(x_label));
  out += fmt::format("<text transform=\"translate(16 {:.1f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                     kTop + ph / 2, xml_escape(y_label));
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto* color = kPalette[i % kPalette.size()];
    std::string pts;
    for (const auto& p : series[i].points) pts += fmt::format("{:.1f},{:.1f} ", sx(p.iteration), sy(p.mean));
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, pts);
    for (const auto& p : series[i].points) {
      out += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", sx(p.iteration), sy(p.mean), color);
    }
    const double ly = kTop + 10 + 18.0 * i;
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       kLeft + pw + 12, ly, kLeft + pw + 32, color);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", kLeft + pw + 38, ly + 4, xml_escape(series[i].name));
  }
  out += "</svg>\n";
  return out;
}

}  // namespace mt2ie::report
