#pragma once

// Sparse undirected graphs, their normalized propagation operators, and the
// dataset bundle (features, labels, split) consumed by every other module.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "nsp/matrix.hpp"

namespace nsp {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Maximum node count for operations that materialize N x N dense matrices.
std::size_t dense_cap() noexcept;
void set_dense_cap(std::size_t cap) noexcept;
// Throws CapacityExceeded when n exceeds dense_cap().
void require_dense_capacity(std::size_t n, const char* what);

// Immutable, symmetric, binary adjacency without self-loops.
class Graph {
 public:
  Graph() = default;

  std::size_t n_nodes() const noexcept { return n_; }
  std::size_t n_edges() const noexcept { return edges_.size(); }

  // Each undirected edge once, as (u, v) with u < v, sorted lexicographically.
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<NodeId>& col() const noexcept { return col_; }

  std::span<const NodeId> neighbors(NodeId u) const noexcept {
    return {col_.data() + row_ptr_[u], row_ptr_[u + 1] - row_ptr_[u]};
  }
  std::size_t degree(NodeId u) const noexcept { return row_ptr_[u + 1] - row_ptr_[u]; }
  bool has_edge(NodeId u, NodeId v) const noexcept;

  bool operator==(const Graph& other) const noexcept {
    return n_ == other.n_ && edges_ == other.edges_;
  }

 private:
  friend Graph build_graph(std::span<const Edge> edge_list, std::size_t n_nodes);

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<NodeId> col_;
};

// Deduplicates, symmetrizes and drops self-loops (u == v entries are ignored).
// Throws InvalidNode for an endpoint outside [0, n_nodes).
Graph build_graph(std::span<const Edge> edge_list, std::size_t n_nodes);

// D~^{-1/2} (A + I) D~^{-1/2}, degrees counted on A + I.
SparseMatrix normalized_adjacency(const Graph& g);

// A^tau X with the raw binary adjacency, by tau repeated sparse products.
Matrix powered_features(const Graph& g, const Matrix& x, int tau);

struct LabelVector {
  std::vector<int> labels;
  int n_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  int operator[](std::size_t i) const noexcept { return labels[i]; }
};

// Validates range and C >= 2; n_classes is inferred as max + 1 when zero.
LabelVector make_labels(std::vector<int> labels, int n_classes = 0);

// Fraction of edges joining same-label endpoints. Throws EmptyGraph.
double homophily_ratio(const Graph& g, const LabelVector& y);

using Mask = std::vector<bool>;

struct DataSplit {
  Mask train;
  Mask val;
  Mask test;
};

std::size_t mask_count(const Mask& m) noexcept;

// Disjointness, non-empty train, every class present in train.
void validate_split(const DataSplit& split, const LabelVector& y);

// Stratified, seeded split; each class contributes at least one train node.
DataSplit stratified_split(const LabelVector& y, double train_frac, double val_frac,
                           std::uint64_t seed);

struct Dataset {
  Graph graph;
  Matrix features;
  LabelVector labels;
  DataSplit split;

  std::size_t n_nodes() const noexcept { return graph.n_nodes(); }
};

// Shape and value checks across the bundle.
void validate_dataset(const Dataset& d);

// Same dataset with the graph replaced (attacks, sanitization).
Dataset with_graph(const Dataset& d, Graph g);

}  // namespace nsp
