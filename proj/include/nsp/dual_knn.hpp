#pragma once

// Positive (most similar) and negative (least similar) kNN graphs over
// tau-hop neighbor similarity, with their normalized propagation matrices.

#include <span>
#include <vector>

#include "nsp/graph.hpp"
#include "nsp/similarity.hpp"

namespace nsp {

enum class KnnOrder { Descending, Ascending };

// For each node u, the k nodes v != u with the largest (Descending) or
// smallest (Ascending) sim(u, v). Ties go to the lower node index.
// Throws InvalidK unless 1 <= k <= N - 1.
std::vector<std::vector<NodeId>> knn_select(const Matrix& sim, std::size_t k, KnnOrder order);

// Union-symmetrized graph of a directed kNN selection.
Graph knn_graph(const std::vector<std::vector<NodeId>>& lists);

struct DualKnnGraphs {
  std::vector<int> taus;            // default {1, 2}
  std::vector<Graph> pos_graphs;    // one per tau, before self-loops
  std::vector<Graph> neg_graphs;
  std::vector<SparseMatrix> pos;    // normalized (A_knn + I)
  std::vector<SparseMatrix> neg;
  std::size_t k_pos = 0;
  std::size_t k_neg = 0;

  std::size_t n_nodes() const noexcept { return pos.empty() ? 0 : pos.front().n; }
};

inline constexpr int kDefaultTaus[] = {1, 2};

DualKnnGraphs build_dual_knn(const Graph& g, const Matrix& x, std::size_t k_pos,
                             std::size_t k_neg, std::span<const int> taus = kDefaultTaus);

}  // namespace nsp
