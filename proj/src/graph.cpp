#include "nsp/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "nsp/error.hpp"
#include "nsp/kernels.hpp"

namespace nsp {
namespace {
std::atomic<std::size_t> g_dense_cap{20000};
}

std::size_t dense_cap() noexcept { return g_dense_cap.load(); }
void set_dense_cap(std::size_t cap) noexcept { g_dense_cap.store(cap); }

void require_dense_capacity(std::size_t n, const char* what) {
  if (n > dense_cap()) {
    throw Error(ErrorCode::CapacityExceeded, std::string(what) + ": " + std::to_string(n) +
                                                 " nodes exceeds dense cap " +
                                                 std::to_string(dense_cap()));
  }
}

bool Graph::has_edge(NodeId u, NodeId v) const noexcept {
  if (u >= n_ || v >= n_) return false;
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

Graph build_graph(std::span<const Edge> edge_list, std::size_t n_nodes) {
  Graph g;
  g.n_ = n_nodes;
  g.edges_.reserve(edge_list.size());
  for (auto [u, v] : edge_list) {
    if (u >= n_nodes || v >= n_nodes) {
      throw Error(ErrorCode::InvalidNode, "edge (" + std::to_string(u) + "," + std::to_string(v) +
                                              ") outside [0," + std::to_string(n_nodes) + ")");
    }
    if (u == v) continue;
    g.edges_.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());

  std::vector<std::size_t> deg(n_nodes, 0);
  for (auto [u, v] : g.edges_) {
    ++deg[u];
    ++deg[v];
  }
  g.row_ptr_.assign(n_nodes + 1, 0);
  for (std::size_t i = 0; i < n_nodes; ++i) g.row_ptr_[i + 1] = g.row_ptr_[i] + deg[i];
  g.col_.assign(g.row_ptr_[n_nodes], 0);
  std::vector<std::size_t> cursor(g.row_ptr_.begin(), g.row_ptr_.end() - 1);
  // Edges are sorted by (u, v), so filling in this order leaves each row sorted
  // except for the mirrored entries; sort per row afterwards.
  for (auto [u, v] : g.edges_) {
    g.col_[cursor[u]++] = v;
    g.col_[cursor[v]++] = u;
  }
  for (std::size_t i = 0; i < n_nodes; ++i) {
    std::sort(g.col_.begin() + static_cast<std::ptrdiff_t>(g.row_ptr_[i]),
              g.col_.begin() + static_cast<std::ptrdiff_t>(g.row_ptr_[i + 1]));
  }
  return g;
}

SparseMatrix normalized_adjacency(const Graph& g) {
  const std::size_t n = g.n_nodes();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(static_cast<NodeId>(i)) + 1));

  SparseMatrix m;
  m.n = n;
  m.row_ptr.assign(n + 1, 0);
  m.col.reserve(g.col().size() + n);
  m.val.reserve(g.col().size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool self_done = false;
    for (NodeId j : g.neighbors(static_cast<NodeId>(i))) {
      if (!self_done && j > i) {
        m.col.push_back(static_cast<std::uint32_t>(i));
        m.val.push_back(inv_sqrt[i] * inv_sqrt[i]);
        self_done = true;
      }
      m.col.push_back(j);
      m.val.push_back(inv_sqrt[i] * inv_sqrt[j]);
    }
    if (!self_done) {
      m.col.push_back(static_cast<std::uint32_t>(i));
      m.val.push_back(inv_sqrt[i] * inv_sqrt[i]);
    }
    m.row_ptr[i + 1] = m.col.size();
  }
  return m;
}

Matrix powered_features(const Graph& g, const Matrix& x, int tau) {
  if (x.rows() != g.n_nodes()) {
    throw Error(ErrorCode::ShapeMismatch, "feature rows do not match node count");
  }
  if (tau < 0) throw Error(ErrorCode::InvalidConfig, "tau must be non-negative");
  Matrix cur = x;
  for (int t = 0; t < tau; ++t) {
    Matrix next(cur.rows(), cur.cols());
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
      auto dst = next.row(i);
      for (NodeId j : g.neighbors(static_cast<NodeId>(i))) kernels::axpy(1.0, cur.row(j), dst);
    }
    cur = std::move(next);
  }
  return cur;
}

LabelVector make_labels(std::vector<int> labels, int n_classes) {
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw Error(ErrorCode::ShapeMismatch, "negative label");
    max_label = std::max(max_label, l);
  }
  if (n_classes == 0) n_classes = max_label + 1;
  if (n_classes < 2) throw Error(ErrorCode::ShapeMismatch, "need at least two classes");
  if (max_label >= n_classes) throw Error(ErrorCode::ShapeMismatch, "label out of range");
  return LabelVector{std::move(labels), n_classes};
}

double homophily_ratio(const Graph& g, const LabelVector& y) {
  if (g.n_edges() == 0) throw Error(ErrorCode::EmptyGraph, "homophily of an edgeless graph");
  if (y.size() != g.n_nodes()) throw Error(ErrorCode::ShapeMismatch, "labels vs nodes");
  std::size_t same = 0;
  for (auto [u, v] : g.edges()) same += (y[u] == y[v]);
  return static_cast<double>(same) / static_cast<double>(g.n_edges());
}

std::size_t mask_count(const Mask& m) noexcept {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
}

void validate_split(const DataSplit& split, const LabelVector& y) {
  const std::size_t n = y.size();
  if (split.train.size() != n || split.val.size() != n || split.test.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "split masks must cover every node");
  }
  std::vector<bool> seen(static_cast<std::size_t>(y.n_classes), false);
  std::size_t n_train = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int hits = split.train[i] + split.val[i] + split.test[i];
    if (hits > 1) throw Error(ErrorCode::ShapeMismatch, "split masks overlap at node " + std::to_string(i));
    if (split.train[i]) {
      ++n_train;
      seen[static_cast<std::size_t>(y[i])] = true;
    }
  }
  if (n_train == 0) throw Error(ErrorCode::EmptyMask, "training mask is empty");
  for (int c = 0; c < y.n_classes; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) {
      throw Error(ErrorCode::ShapeMismatch, "class " + std::to_string(c) + " missing from train");
    }
  }
}

DataSplit stratified_split(const LabelVector& y, double train_frac, double val_frac,
                           std::uint64_t seed) {
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "split fractions out of range");
  }
  const std::size_t n = y.size();
  DataSplit s{Mask(n, false), Mask(n, false), Mask(n, false)};
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(y.n_classes));
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(y[i])].push_back(i);
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto m = members.size();
    auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(m)));
    auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(m)));
    if (m > 0) n_train = std::clamp<std::size_t>(n_train, 1, m);
    n_val = std::min(n_val, m - n_train);
    for (std::size_t k = 0; k < m; ++k) {
      Mask& target = k < n_train ? s.train : (k < n_train + n_val ? s.val : s.test);
      target[members[k]] = true;
    }
  }
  return s;
}

void validate_dataset(const Dataset& d) {
  const std::size_t n = d.graph.n_nodes();
  if (d.features.rows() != n) {
    throw Error(ErrorCode::ShapeMismatch, "feature rows (" + std::to_string(d.features.rows()) +
                                              ") != node count (" + std::to_string(n) + ")");
  }
  for (double v : d.features.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::ShapeMismatch, "non-finite feature value");
  }
  if (d.labels.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "label count (" + std::to_string(d.labels.size()) +
                                              ") != node count (" + std::to_string(n) + ")");
  }
  validate_split(d.split, d.labels);
}

Dataset with_graph(const Dataset& d, Graph g) {
  Dataset out = d;
  out.graph = std::move(g);
  return out;
}

}  // namespace nsp
