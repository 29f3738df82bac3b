#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/gateway.hpp"
#include "core/runner.hpp"
#include "core/templates.hpp"

namespace fixtures {

inline std::string path(const std::string& name) { return std::string(MT2IE_FIXTURE_DIR) + "/" + name; }

inline std::vector<std::vector<std::string>> read_tsv(const std::string& name) {
  std::ifstream in(path(name));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    rows.push_back(cols);
  }
  return rows;
}

inline std::string slurp(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& file, const std::string& content) {
  std::ofstream out(file, std::ios::binary);
  out << content;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    dir_ = std::filesystem::temp_directory_path() / ("mt2ie-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (dir_ / name).string(); }
  std::string str() const { return dir_.string(); }

 private:
  std::filesystem::path dir_;
};

inline mt2ie::ModelEndpoint mock_endpoint(mt2ie::EndpointKind kind, const std::string& script,
                                          const std::string& model = "mock-model") {
  mt2ie::ModelEndpoint ep;
  ep.kind = kind;
  ep.model_id = model;
  ep.mock_script = script;
  return ep;
}

// Default configuration with every endpoint on the given mock script and a
// single repeat.
inline mt2ie::run::RunConfig mock_config(const std::string& script = "scripted") {
  mt2ie::run::RunConfig c;
  c.repeat_count = 1;
  c.mllm = mock_endpoint(mt2ie::EndpointKind::kMllm, script, "judge");
  c.t2i = mock_endpoint(mt2ie::EndpointKind::kT2i, script, "t2i");
  return c;
}

inline std::string fixed_clock() { return "2000-01-01T00:00:00Z"; }

inline std::string write_script(const TempDir& dir, const std::string& name, const nlohmann::json& script) {
  const auto p = dir.file(name);
  spit(p, script.dump(2));
  return p;
}

// The adaptive example run: knives and forks chain.
struct AdaptiveExample {
  std::vector<std::string> prompts;
  std::vector<double> scores;
  std::vector<std::string> bins;  // bin applied at iterations 2..5
};

inline AdaptiveExample adaptive_example() {
  const std::string p1 = "a set of knives and forks leaning against each other on a table";
  const std::string p2 = p1 + " with a white tablecloth and a vase of flowers in the background";
  const std::string p3 = p2 + " with a small wooden bowl of fruit on the table and a cat sitting on the floor next to the table";
  const std::string p4 = p3 + " and a bird perched on the tablecloth";
  const std::string p5 = p2;
  return {{p1, p2, p3, p4, p5}, {0.912, 0.939, 0.835, 0.386, 0.911}, {"increase2", "increase2", "increase2", "reduce"}};
}

inline nlohmann::json adaptive_example_script() {
  const auto f = adaptive_example();
  return {{"chat",
           {{"rules",
             {{{"when", "by adding a few terms"},
               {"replies", {"Prompt: " + f.prompts[1], "Prompt: " + f.prompts[2], "Prompt: " + f.prompts[3]}}},
              {{"when", "by removing two terms"}, {"replies", {"Prompt: " + f.prompts[4]}}}}},
            {"default", "none"}}},
          {"logprobs", {{"scores", f.scores}}}};
}

inline mt2ie::run::RunConfig adaptive_example_config(const std::string& script_path) {
  auto c = mock_config(script_path);
  c.mode = mt2ie::run::Mode::kAdaptive;
  c.seed_prompts = {adaptive_example().prompts[0]};
  return c;
}

// The red crab few-shot block from the question-generation template.
inline std::string red_crab_block() {
  const std::string t(mt2ie::templates::text("qgen-fewshot"));
  const auto start = t.find("Image description: a drawing of a red crab");
  const auto end = t.find("\n\n", start);
  return t.substr(start, end - start);
}

}  // namespace fixtures
