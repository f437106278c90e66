#pragma once

// NSPGNN layer stack, GCN and SGC baselines, and exact reverse-mode gradients.
//
// An NSPGNN layer computes, per node row,
//   alpha = logistic(H W_pg + b_pg),  beta = logistic(H W_ng + b_ng)
//   P = sum_t alpha_t (.) P_t          (positive kNN, low-pass)
//   Q = sum_t beta_t  (.) Q_t          (negative kNN, high-pass)
//   H' = act(H W_ego + P H W_low + (I - Q) H W_high)
// where (.) scales row i of a matrix by the i-th gate value. The ablation
// without negative graphs drops the beta gates and the high-pass branch.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsp/dual_knn.hpp"
#include "nsp/graph.hpp"
#include "nsp/matrix.hpp"

namespace nsp {

enum class Variant { Nspgnn, NspgnnWo, Gcn, Sgc };

std::string_view to_string(Variant v) noexcept;
Variant parse_variant(std::string_view name);
bool needs_dual(Variant v) noexcept;

// Weights of one layer. Blocks a variant does not use stay empty; GCN and SGC
// keep their single propagation weight in `low`.
struct LayerParams {
  Matrix gate_pos_w;  // in x T
  Matrix gate_pos_b;  // 1 x T
  Matrix gate_neg_w;  // in x T
  Matrix gate_neg_b;  // 1 x T
  Matrix ego;         // in x out
  Matrix low;         // in x out
  Matrix high;        // in x out

  bool operator==(const LayerParams&) const = default;
};

struct ModelParams {
  Variant variant = Variant::Nspgnn;
  std::vector<std::size_t> dims;  // [p, hidden..., C]
  std::size_t n_gates = 2;        // number of taus mixed by the gates
  int sgc_tau = 2;
  std::vector<LayerParams> layers;

  std::size_t n_params() const noexcept;
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);
  ModelParams zeros_like() const;

  // Visits every parameter block in flattening order.
  template <class F>
  void for_each_block(F&& f) {
    for (auto& l : layers)
      for (Matrix* m : {&l.gate_pos_w, &l.gate_pos_b, &l.gate_neg_w, &l.gate_neg_b, &l.ego,
                        &l.low, &l.high})
        if (!m->empty()) f(*m);
  }
  template <class F>
  void for_each_block(F&& f) const {
    for (const auto& l : layers)
      for (const Matrix* m : {&l.gate_pos_w, &l.gate_pos_b, &l.gate_neg_w, &l.gate_neg_b,
                              &l.ego, &l.low, &l.high})
        if (!m->empty()) f(*m);
  }

  bool operator==(const ModelParams&) const = default;
};

// Glorot-uniform weights from a seeded generator, zero biases. SGC uses only
// dims.front() and dims.back().
ModelParams init_params(Variant variant, std::span<const std::size_t> dims, std::uint64_t seed,
                        std::size_t n_gates = 2, int sgc_tau = 2);

// Non-owning view of everything a forward pass propagates over. The referenced
// objects must outlive any tape built from them.
struct ModelInputs {
  const Matrix* features = nullptr;
  const SparseMatrix* adjacency = nullptr;  // normalized A-hat, gcn and sgc
  const DualKnnGraphs* dual = nullptr;      // nspgnn variants
  const Matrix* sgc_propagated = nullptr;   // optional cached A-hat^tau X
};

struct ForwardOptions {
  // Pin every positive / negative gate to a constant instead of the gate MLP.
  std::optional<double> fixed_pos_gate;
  std::optional<double> fixed_neg_gate;
};

struct LayerCache {
  Matrix input;
  Matrix pos_gates;                 // N x T
  Matrix neg_gates;
  std::vector<Matrix> pos_prop;     // P_t (H W_low)
  std::vector<Matrix> neg_prop;     // Q_t (H W_high)
  Matrix low_input;                 // H W_low
  Matrix high_input;                // H W_high
  Matrix propagated;                // gcn: A-hat H; sgc: A-hat^tau X
  Matrix pre;                       // pre-activation
  bool relu = false;
};

struct ForwardTape {
  Variant variant = Variant::Nspgnn;
  std::vector<std::size_t> dims;
  std::size_t n_nodes = 0;
  ModelInputs inputs;
  ForwardOptions options;
  std::vector<LayerCache> layers;
  Matrix logits;
  Matrix probs;
};

Matrix logistic(const Matrix& z);
Matrix softmax_rows(const Matrix& z);

// logistic(h W + b), N x T.
Matrix gates(const Matrix& h, const Matrix& w, const Matrix& b);

// One NSPGNN (or NSPGNN-w.o. when lp.high is empty) layer; fills `cache` when given.
Matrix nspgnn_layer(const Matrix& h, const DualKnnGraphs& dual, const LayerParams& lp,
                    bool apply_relu, const ForwardOptions& opts = {},
                    LayerCache* cache = nullptr);

// Class probabilities with the tape needed for backward.
ForwardTape forward(const ModelParams& params, const ModelInputs& inputs,
                    const ForwardOptions& opts = {});

// Convenience overload: builds A-hat from the dataset graph as needed.
Matrix forward(const ModelParams& params, const Dataset& data, const DualKnnGraphs* dual,
               const ForwardOptions& opts = {});

// Gradient over all parameters given dL/dS.
ModelParams backward(const ForwardTape& tape, const ModelParams& params, const Matrix& grad_probs);
// Gradient given dL/dZ for the pre-softmax logits.
ModelParams backward_logits(const ForwardTape& tape, const ModelParams& params,
                            const Matrix& grad_logits);

// Two-layer (or deeper) GCN probabilities, act(A-hat H W) per layer.
Matrix gcn_forward(const ModelParams& params, const Dataset& data);

// A-hat^tau X
Matrix sgc_propagate(const SparseMatrix& adj_norm, const Matrix& x, int tau);

struct SanitizePolicy {
  std::optional<double> keep_fraction;  // keep the top fraction of edges
  std::optional<double> threshold;      // or drop edges scoring below this
};

// Drops low neighbor-similarity edges, scoring each edge by the minimum over
// taus of cosine(A^tau X)[u, v]. Throws EmptyGraph if nothing survives.
Graph nsp_sanitize(const Graph& g, const Matrix& x, const SanitizePolicy& policy,
                   std::span<const int> taus = kDefaultTaus);

}  // namespace nsp
