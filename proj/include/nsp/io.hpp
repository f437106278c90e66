#pragma once

// File formats:
//   edges     TSV, one "u<TAB>v" per line, 0-indexed, '#' comments
//   features  CSV, N rows x p real columns, no header
//   labels    CSV, one integer per line
//   split     JSON {"train":[ids],"val":[ids],"test":[ids]}
//   density   CSV "score,label" with label in {benign,malicious,removed}
//   checkpoint  one JSON header line, then the flat float64 parameters as
//               little-endian bytes

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nsp/graph.hpp"
#include "nsp/model.hpp"
#include "nsp/similarity.hpp"

namespace nsp::io {

namespace fs = std::filesystem;

std::vector<Edge> read_edge_list(const fs::path& path);
void write_edge_list(const fs::path& path, const Graph& g);
void write_edge_list(const fs::path& path, const std::vector<Edge>& edges);

Matrix read_features(const fs::path& path);
void write_features(const fs::path& path, const Matrix& x);

std::vector<int> read_labels(const fs::path& path);
void write_labels(const fs::path& path, const LabelVector& y);

DataSplit read_split(const fs::path& path, std::size_t n_nodes);
void write_split(const fs::path& path, const DataSplit& split);

struct DatasetPaths {
  fs::path edges;
  fs::path features;
  fs::path labels;
  std::optional<fs::path> split;
};

struct DatasetStats {
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
  int n_classes = 0;
  std::size_t n_features = 0;
  std::optional<double> homophily;  // absent for an edgeless graph
};

DatasetStats dataset_stats(const Dataset& d);

// Validated dataset. Without a split file a stratified 10/10/80 split is
// drawn from split_seed.
Dataset load_dataset(const DatasetPaths& paths, std::uint64_t split_seed = 0);
void save_dataset(const fs::path& dir, const Dataset& d);
DatasetPaths dataset_paths_in(const fs::path& dir);

// Writes dir/scores_tau{tau}.csv; throws EmptyDistribution when all sets are empty.
fs::path write_density(const fs::path& dir, const LinkScoreSets& scores);

struct DensityRow {
  double score;
  std::string label;
};
std::vector<DensityRow> read_density(const fs::path& path);

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::size_t k_pos = 0;
  std::size_t k_neg = 0;
  std::vector<int> taus{1, 2};
};

void save_checkpoint(const fs::path& path, const ModelParams& params, const CheckpointMeta& meta);
ModelParams load_checkpoint(const fs::path& path, CheckpointMeta* meta = nullptr);

std::string format_double(double v);

}  // namespace nsp::io
