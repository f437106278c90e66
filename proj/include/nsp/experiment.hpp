#pragma once

// Experiment orchestration: dataset (synthetic or files) -> optional attack
// per budget -> dual kNN -> train each model over seeds -> aggregate.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nsp/attack.hpp"
#include "nsp/io.hpp"
#include "nsp/synthetic.hpp"
#include "nsp/training.hpp"

namespace nsp {

std::string version_string();

enum class AttackKind { None, Gradient, BruteForce, External };

struct ModelSpec {
  std::string name;
  Variant variant = Variant::Nspgnn;
  bool sanitize = false;  // NSP-Sanitize: prune the graph, then train `variant`
  std::optional<std::size_t> k_pos;
  std::optional<std::size_t> k_neg;
  std::optional<std::vector<int>> taus;
};

struct ExperimentConfig {
  std::optional<SyntheticSpec> synthetic;
  std::optional<io::DatasetPaths> files;

  AttackKind attack = AttackKind::None;
  std::vector<double> budgets{0.0};  // attack powers; 0 is the clean graph
  AttackConfig attack_config;
  std::optional<std::filesystem::path> poisoned_edges;  // AttackKind::External

  std::vector<ModelSpec> models;
  TrainConfig train;
  std::vector<std::size_t> k_grid_pos;  // non-empty: add an nspgnn cell per (k1, k2)
  std::vector<std::size_t> k_grid_neg;
  std::vector<int> analysis_taus{0, 1, 2, 3, 5, 10};
  double sanitize_keep_fraction = 0.8;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "results";
  std::size_t workers = 1;
};

// Parses and validates a JSON config. Relative file paths resolve against base_dir.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = ".");
// The config with every default filled in, as JSON text.
std::string experiment_config_json(const ExperimentConfig& cfg);

struct CellResult {
  std::string model;
  double budget = 0.0;
  std::uint64_t seed = 0;
  std::optional<TrainResult> result;
  std::string error;
};

struct SummaryRow {
  std::string model;
  double budget = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

struct AttackSummary {
  double budget = 0.0;
  std::size_t n_flips = 0;
  std::optional<double> homophily;
  double clean_loss = 0.0;
  double final_loss = 0.0;
  std::vector<SeparationRow> separation;
  std::string error;
};

struct ExperimentResult {
  io::DatasetStats stats;
  std::vector<AttackSummary> attacks;
  std::vector<CellResult> cells;    // config order
  std::vector<SummaryRow> summary;
  double seconds = 0.0;
};

// Runs every (budget, model, seed) cell. Cell failures are recorded and the
// run continues. Writes results.json, density CSVs and poisoned edge lists
// under cfg.output_dir when write_outputs is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

// Mean and standard error (sample std / sqrt(n)) of a metric list.
std::pair<double, double> mean_stderr(const std::vector<double>& values);

std::string results_json(const ExperimentConfig& cfg, const ExperimentResult& r);

// The results document with wall-clock fields removed, for reproducibility checks.
std::string results_metrics_json(const std::string& results_json_text);

const SummaryRow* find_summary(const ExperimentResult& r, const std::string& model, double budget);

}  // namespace nsp
