#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "nsp/error.hpp"
#include "nsp/experiment.hpp"

using namespace nsp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& tag) {
  return fs::temp_directory_path() / ("nsp_exp_" + tag + "_" + std::to_string(std::random_device{}()));
}

std::string small_config(const fs::path& out, const std::string& extra = "") {
  return R"({
    "dataset": {"synthetic": {"n_nodes": 120, "n_classes": 3, "mean_degree": 6, "homophily": 0.8,
                              "feature_dim": 8, "seed": 1}},
    "train": {"epochs": 60, "hidden": [16], "k_pos": 4, "k_neg": 4},
    "seeds": [0, 1, 2],
    "output_dir": ")" + out.string() + "\"" + extra + "}";
}

}  // namespace

TEST_CASE("experiment on a homophilic synthetic graph produces a schema-valid results.json") {
  const fs::path out = temp_dir("schema");
  const ExperimentConfig cfg = parse_experiment_config(small_config(out));
  REQUIRE(cfg.models.size() == 2);
  const ExperimentResult r = run_experiment(cfg);
  std::ifstream in(out / "results.json");
  const json j = json::parse(in);
  for (const char* key : {"version", "config", "dataset_stats", "attacks", "cells", "summary", "runtime_seconds"})
    CHECK(j.contains(key));
  CHECK(j["cells"].size() == 6);
  for (const auto& c : j["cells"]) {
    CHECK(c["error"].is_null());
    const double acc = c["test_accuracy"].get<double>();
    CHECK(acc > 0.0);
    CHECK(acc <= 1.0);
    CHECK(c["train_loss"].size() == 60);
  }
  CHECK(j["summary"].size() == 2);
  CHECK(j["config"]["train"]["lr"].get<double>() == 0.01);
  CHECK(j["config"]["analysis_taus"].size() == 6);
  CHECK(r.stats.n_nodes == 120);
  fs::remove_all(out);
}

TEST_CASE("summary mean and stderr recompute from cells") {
  const fs::path out = temp_dir("stats");
  const ExperimentConfig cfg = parse_experiment_config(small_config(out));
  const ExperimentResult r = run_experiment(cfg, false);
  for (const SummaryRow& s : r.summary) {
    std::vector<double> acc;
    for (const CellResult& c : r.cells)
      if (c.model == s.model && c.budget == s.budget) acc.push_back(c.result->test_accuracy);
    REQUIRE(acc.size() == 3);
    double mean = 0.0;
    for (double a : acc) mean += a / 3.0;
    double var = 0.0;
    for (double a : acc) var += (a - mean) * (a - mean) / 2.0;
    CHECK(std::abs(s.mean - mean) < 1e-12);
    CHECK(std::abs(s.stderr_ - std::sqrt(var / 3.0)) < 1e-12);
  }
  CHECK(mean_stderr({0.5}).second == 0.0);
}

TEST_CASE("experiment metrics are reproducible, also with several workers") {
  const fs::path out = temp_dir("det");
  const std::string extra = R"(, "attack": {"kind": "gradient", "budgets": [0, 0.1]}, "models": ["gcn", "nspgnn", "nsp_sanitize"])";
  ExperimentConfig cfg = parse_experiment_config(small_config(out, extra));
  cfg.train.epochs = 20;
  const std::string a = results_metrics_json(results_json(cfg, run_experiment(cfg, false)));
  const std::string b = results_metrics_json(results_json(cfg, run_experiment(cfg, false)));
  CHECK(a == b);
  cfg.workers = 3;
  const std::string c = results_metrics_json(results_json(cfg, run_experiment(cfg, false)));
  // Worker count is echoed in the config; compare everything else.
  json ja = json::parse(a), jc = json::parse(c);
  ja["config"].erase("workers");
  jc["config"].erase("workers");
  CHECK(ja == jc);
}

TEST_CASE("k grid adds one nspgnn cell per (k1, k2)") {
  const fs::path out = temp_dir("kgrid");
  ExperimentConfig cfg = parse_experiment_config(
      small_config(out, R"(, "models": ["gcn"], "k_grid": {"k_pos": [2, 4], "k_neg": [3, 5, 7]})"));
  cfg.seeds = {0};
  cfg.train.epochs = 5;
  const ExperimentResult r = run_experiment(cfg, false);
  CHECK(r.summary.size() == 1 + 6);
  CHECK(find_summary(r, "nspgnn_k4_7", 0.0) != nullptr);
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
  auto code = [](const std::string& text) {
    try {
      parse_experiment_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code(R"({"dataset": {"synthetic": {}}, "bogus": 1})") == ErrorCode::InvalidConfig);
  CHECK(code(R"({"dataset": {"synthetic": {}}, "train": {"lr": -1}})") == ErrorCode::InvalidConfig);
  CHECK(code(R"({"dataset": {"synthetic": {}}, "models": ["resnet"]})") == ErrorCode::InvalidConfig);
  CHECK(code("{not json") == ErrorCode::ParseError);
  CHECK(code(R"({"train": {}})") == ErrorCode::InvalidConfig);
  const ExperimentConfig cfg = parse_experiment_config(R"({"dataset": {"synthetic": {}}})");
  const ExperimentConfig again = parse_experiment_config(experiment_config_json(cfg));
  CHECK(experiment_config_json(again) == experiment_config_json(cfg));
}
