#include "nsp/dual_knn.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "nsp/error.hpp"

namespace nsp {

std::vector<std::vector<NodeId>> knn_select(const Matrix& sim, std::size_t k, KnnOrder order) {
  const std::size_t n = sim.rows();
  if (sim.cols() != n) throw Error(ErrorCode::ShapeMismatch, "similarity must be square");
  if (k < 1 || k + 1 > n) {
    throw Error(ErrorCode::InvalidK, "k=" + std::to_string(k) + " outside [1, " +
                                         std::to_string(n == 0 ? 0 : n - 1) + "]");
  }
  std::vector<std::vector<NodeId>> out(n);
  std::vector<NodeId> cand(n - 1);
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t w = 0;
    for (std::size_t v = 0; v < n; ++v)
      if (v != u) cand[w++] = static_cast<NodeId>(v);
    const auto row = sim.row(u);
    auto before = [&](NodeId a, NodeId b) {
      if (row[a] != row[b]) return order == KnnOrder::Descending ? row[a] > row[b] : row[a] < row[b];
      return a < b;
    };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                      before);
    out[u].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

Graph knn_graph(const std::vector<std::vector<NodeId>>& lists) {
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < lists.size(); ++u)
    for (NodeId v : lists[u]) edges.emplace_back(static_cast<NodeId>(u), v);
  return build_graph(edges, lists.size());
}

DualKnnGraphs build_dual_knn(const Graph& g, const Matrix& x, std::size_t k_pos,
                             std::size_t k_neg, std::span<const int> taus) {
  if (taus.empty()) throw Error(ErrorCode::InvalidConfig, "dual kNN needs at least one tau");
  DualKnnGraphs d;
  d.taus.assign(taus.begin(), taus.end());
  d.k_pos = k_pos;
  d.k_neg = k_neg;
  for (int tau : taus) {
    const SimilarityMatrix sim = similarity_matrix(g, x, tau);
    Graph pg = knn_graph(knn_select(sim.values, k_pos, KnnOrder::Descending));
    Graph ng = knn_graph(knn_select(sim.values, k_neg, KnnOrder::Ascending));
    d.pos.push_back(normalized_adjacency(pg));
    d.neg.push_back(normalized_adjacency(ng));
    d.pos_graphs.push_back(std::move(pg));
    d.neg_graphs.push_back(std::move(ng));
  }
  return d;
}

}  // namespace nsp
