#include "nsp/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "nsp/error.hpp"
#include "nsp/kernels.hpp"
#include "nsp/similarity.hpp"

namespace nsp {

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Nspgnn: return "nspgnn";
    case Variant::NspgnnWo: return "nspgnn_wo";
    case Variant::Gcn: return "gcn";
    case Variant::Sgc: return "sgc";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::Nspgnn, Variant::NspgnnWo, Variant::Gcn, Variant::Sgc})
    if (to_string(v) == name) return v;
  throw Error(ErrorCode::InvalidConfig, "unknown model variant '" + std::string(name) + "'");
}

bool needs_dual(Variant v) noexcept { return v == Variant::Nspgnn || v == Variant::NspgnnWo; }

std::size_t ModelParams::n_params() const noexcept {
  std::size_t n = 0;
  for_each_block([&](const Matrix& m) { n += m.size(); });
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(n_params());
  for_each_block([&](const Matrix& m) { flat.insert(flat.end(), m.data().begin(), m.data().end()); });
  return flat;
}

void ModelParams::assign_flat(std::span<const double> flat) {
  if (flat.size() != n_params()) {
    throw Error(ErrorCode::ShapeMismatch, "flat parameter vector has " + std::to_string(flat.size()) +
                                              " entries, model has " + std::to_string(n_params()));
  }
  std::size_t off = 0;
  for_each_block([&](Matrix& m) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), m.size(), m.data().begin());
    off += m.size();
  });
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each_block([](Matrix& m) { m.fill(0.0); });
  return z;
}

namespace {

Matrix glorot(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(in, out);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

Matrix column(const Matrix& m, std::size_t c) {
  Matrix out(m.rows(), 1);
  for (std::size_t i = 0; i < m.rows(); ++i) out(i, 0) = m(i, c);
  return out;
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) kernels::axpy(1.0, m.row(i), out.row(0));
  return out;
}

void relu_inplace(Matrix& m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

// Adds diag(scale) * src into dst.
void add_row_scaled(Matrix& dst, const Matrix& src, const Matrix& scale_col, double sign = 1.0) {
  for (std::size_t i = 0; i < dst.rows(); ++i)
    kernels::axpy(sign * scale_col(i, 0), src.row(i), dst.row(i));
}

void check_dual(const DualKnnGraphs* dual, const Matrix& h) {
  if (dual == nullptr || dual->pos.empty()) {
    throw Error(ErrorCode::MissingDualGraphs, "nspgnn variants need dual kNN graphs");
  }
  if (dual->n_nodes() != h.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "dual kNN graphs and features differ in node count");
  }
}

}  // namespace

ModelParams init_params(Variant variant, std::span<const std::size_t> dims, std::uint64_t seed,
                        std::size_t n_gates, int sgc_tau) {
  if (dims.size() < 2) throw Error(ErrorCode::InvalidConfig, "model needs input and output dims");
  for (std::size_t d : dims)
    if (d == 0) throw Error(ErrorCode::InvalidConfig, "zero layer width");
  ModelParams p;
  p.variant = variant;
  p.n_gates = n_gates;
  p.sgc_tau = sgc_tau;
  std::mt19937_64 rng(seed);
  if (variant == Variant::Sgc) {
    p.dims = {dims.front(), dims.back()};
    LayerParams l;
    l.low = glorot(dims.front(), dims.back(), rng);
    p.layers.push_back(std::move(l));
    return p;
  }
  p.dims.assign(dims.begin(), dims.end());
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t in = dims[i], out = dims[i + 1];
    LayerParams l;
    if (variant == Variant::Gcn) {
      l.low = glorot(in, out, rng);
    } else {
      l.gate_pos_w = glorot(in, n_gates, rng);
      l.gate_pos_b = Matrix(1, n_gates);
      if (variant == Variant::Nspgnn) {
        l.gate_neg_w = glorot(in, n_gates, rng);
        l.gate_neg_b = Matrix(1, n_gates);
      }
      l.ego = glorot(in, out, rng);
      l.low = glorot(in, out, rng);
      if (variant == Variant::Nspgnn) l.high = glorot(in, out, rng);
    }
    p.layers.push_back(std::move(l));
  }
  return p;
}

Matrix logistic(const Matrix& z) {
  Matrix out = z;
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

Matrix softmax_rows(const Matrix& z) {
  Matrix s = z;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    auto r = s.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : r) v /= sum;
  }
  return s;
}

Matrix gates(const Matrix& h, const Matrix& w, const Matrix& b) {
  if (h.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "gate MLP shapes");
  }
  Matrix z = matmul(h, w);
  for (std::size_t i = 0; i < z.rows(); ++i) kernels::axpy(1.0, b.row(0), z.row(i));
  return logistic(z);
}

Matrix nspgnn_layer(const Matrix& h, const DualKnnGraphs& dual, const LayerParams& lp,
                    bool apply_relu, const ForwardOptions& opts, LayerCache* cache) {
  check_dual(&dual, h);
  const std::size_t n = h.rows();
  const std::size_t n_taus = dual.taus.size();
  const bool with_neg = !lp.high.empty();
  if (lp.ego.rows() != h.cols() || lp.low.rows() != h.cols() ||
      (with_neg && lp.high.rows() != h.cols())) {
    throw Error(ErrorCode::ShapeMismatch, "layer weights do not match input width");
  }
  if (!opts.fixed_pos_gate && lp.gate_pos_w.cols() != n_taus) {
    throw Error(ErrorCode::ShapeMismatch, "gate width differs from the number of kNN taus");
  }

  LayerCache local;
  LayerCache& c = cache ? *cache : local;
  c.relu = apply_relu;
  c.input = h;
  c.pos_gates = opts.fixed_pos_gate ? Matrix(n, n_taus, *opts.fixed_pos_gate)
                                    : gates(h, lp.gate_pos_w, lp.gate_pos_b);

  Matrix pre = matmul(h, lp.ego);
  c.low_input = matmul(h, lp.low);
  c.pos_prop.clear();
  for (std::size_t t = 0; t < n_taus; ++t) {
    c.pos_prop.push_back(dual.pos[t].multiply(c.low_input));
    add_row_scaled(pre, c.pos_prop.back(), column(c.pos_gates, t));
  }

  c.neg_prop.clear();
  if (with_neg) {
    if (!opts.fixed_neg_gate && lp.gate_neg_w.cols() != n_taus) {
      throw Error(ErrorCode::ShapeMismatch, "negative gate width differs from taus");
    }
    c.neg_gates = opts.fixed_neg_gate ? Matrix(n, n_taus, *opts.fixed_neg_gate)
                                      : gates(h, lp.gate_neg_w, lp.gate_neg_b);
    c.high_input = matmul(h, lp.high);
    pre += c.high_input;
    for (std::size_t t = 0; t < n_taus; ++t) {
      c.neg_prop.push_back(dual.neg[t].multiply(c.high_input));
      add_row_scaled(pre, c.neg_prop.back(), column(c.neg_gates, t), -1.0);
    }
  }
  c.pre = pre;
  if (apply_relu) relu_inplace(pre);
  return pre;
}

Matrix sgc_propagate(const SparseMatrix& adj_norm, const Matrix& x, int tau) {
  Matrix f = x;
  for (int t = 0; t < tau; ++t) f = adj_norm.multiply(f);
  return f;
}

ForwardTape forward(const ModelParams& params, const ModelInputs& inputs,
                    const ForwardOptions& opts) {
  if (inputs.features == nullptr) throw Error(ErrorCode::ShapeMismatch, "forward without features");
  const Matrix& x = *inputs.features;
  if (x.cols() != params.dims.front()) {
    throw Error(ErrorCode::ShapeMismatch, "feature width " + std::to_string(x.cols()) +
                                              " != model input " + std::to_string(params.dims.front()));
  }
  ForwardTape tape;
  tape.variant = params.variant;
  tape.dims = params.dims;
  tape.n_nodes = x.rows();
  tape.inputs = inputs;
  tape.options = opts;

  const std::size_t n_layers = params.layers.size();
  Matrix h;
  switch (params.variant) {
    case Variant::Sgc: {
      LayerCache c;
      if (inputs.sgc_propagated != nullptr) {
        c.propagated = *inputs.sgc_propagated;
      } else {
        if (inputs.adjacency == nullptr) throw Error(ErrorCode::ShapeMismatch, "sgc needs A-hat");
        c.propagated = sgc_propagate(*inputs.adjacency, x, params.sgc_tau);
      }
      if (c.propagated.rows() != x.rows()) throw Error(ErrorCode::ShapeMismatch, "sgc features");
      h = matmul(c.propagated, params.layers[0].low);
      c.pre = h;
      tape.layers.push_back(std::move(c));
      break;
    }
    case Variant::Gcn: {
      if (inputs.adjacency == nullptr) throw Error(ErrorCode::ShapeMismatch, "gcn needs A-hat");
      if (inputs.adjacency->n != x.rows()) throw Error(ErrorCode::ShapeMismatch, "A-hat size");
      h = x;
      for (std::size_t l = 0; l < n_layers; ++l) {
        LayerCache c;
        c.relu = l + 1 < n_layers;
        c.input = h;
        c.propagated = inputs.adjacency->multiply(h);
        h = matmul(c.propagated, params.layers[l].low);
        c.pre = h;
        if (c.relu) relu_inplace(h);
        tape.layers.push_back(std::move(c));
      }
      break;
    }
    case Variant::Nspgnn:
    case Variant::NspgnnWo: {
      check_dual(inputs.dual, x);
      h = x;
      for (std::size_t l = 0; l < n_layers; ++l) {
        LayerCache c;
        h = nspgnn_layer(h, *inputs.dual, params.layers[l], l + 1 < n_layers, opts, &c);
        tape.layers.push_back(std::move(c));
      }
      break;
    }
  }
  tape.logits = std::move(h);
  tape.probs = softmax_rows(tape.logits);
  return tape;
}

Matrix forward(const ModelParams& params, const Dataset& data, const DualKnnGraphs* dual,
               const ForwardOptions& opts) {
  ModelInputs in;
  in.features = &data.features;
  in.dual = dual;
  SparseMatrix adj;
  if (!needs_dual(params.variant)) {
    adj = normalized_adjacency(data.graph);
    in.adjacency = &adj;
  }
  return forward(params, in, opts).probs;
}

Matrix gcn_forward(const ModelParams& params, const Dataset& data) {
  if (params.variant != Variant::Gcn) throw Error(ErrorCode::InvalidConfig, "gcn_forward on non-gcn params");
  return forward(params, data, nullptr);
}

namespace {

void check_tape(const ForwardTape& tape, const ModelParams& params, const Matrix& grad) {
  if (tape.variant != params.variant || tape.dims != params.dims ||
      tape.layers.size() != params.layers.size()) {
    throw Error(ErrorCode::TapeMismatch, "tape was recorded for a different model");
  }
  if (grad.rows() != tape.probs.rows() || grad.cols() != tape.probs.cols()) {
    throw Error(ErrorCode::TapeMismatch, "upstream gradient shape differs from the tape output");
  }
}

// Backprop through one NSPGNN layer; returns dL/dH_in.
Matrix nspgnn_layer_backward(const LayerCache& c, const LayerParams& lp, LayerParams& g,
                             const DualKnnGraphs& dual, const ForwardOptions& opts, Matrix grad) {
  const std::size_t n = grad.rows();
  const std::size_t n_taus = dual.taus.size();
  if (c.relu)
    for (std::size_t i = 0; i < grad.size(); ++i)
      if (c.pre.data()[i] <= 0.0) grad.data()[i] = 0.0;

  g.ego = matmul_tn(c.input, grad);
  Matrix dh = matmul_nt(grad, lp.ego);

  // Positive low-pass branch.
  Matrix d_alpha(n, n_taus);
  Matrix d_low_in(n, grad.cols());
  for (std::size_t t = 0; t < n_taus; ++t) {
    const Matrix a = column(c.pos_gates, t);
    for (std::size_t i = 0; i < n; ++i) d_alpha(i, t) = kernels::dot(grad.row(i), c.pos_prop[t].row(i));
    d_low_in += dual.pos[t].multiply_col_scaled(grad, a.data());
  }
  g.low = matmul_tn(c.input, d_low_in);
  dh += matmul_nt(d_low_in, lp.low);
  if (!opts.fixed_pos_gate) {
    Matrix d_logit(n, n_taus);
    for (std::size_t i = 0; i < d_logit.size(); ++i) {
      const double a = c.pos_gates.data()[i];
      d_logit.data()[i] = d_alpha.data()[i] * a * (1.0 - a);
    }
    g.gate_pos_w = matmul_tn(c.input, d_logit);
    g.gate_pos_b = column_sums(d_logit);
    dh += matmul_nt(d_logit, lp.gate_pos_w);
  }

  // Negative high-pass branch, (I - Q) H W_high.
  if (!lp.high.empty()) {
    Matrix d_beta(n, n_taus);
    Matrix d_high_in = grad;
    for (std::size_t t = 0; t < n_taus; ++t) {
      const Matrix b = column(c.neg_gates, t);
      for (std::size_t i = 0; i < n; ++i)
        d_beta(i, t) = -kernels::dot(grad.row(i), c.neg_prop[t].row(i));
      d_high_in -= dual.neg[t].multiply_col_scaled(grad, b.data());
    }
    g.high = matmul_tn(c.input, d_high_in);
    dh += matmul_nt(d_high_in, lp.high);
    if (!opts.fixed_neg_gate) {
      Matrix d_logit(n, n_taus);
      for (std::size_t i = 0; i < d_logit.size(); ++i) {
        const double b = c.neg_gates.data()[i];
        d_logit.data()[i] = d_beta.data()[i] * b * (1.0 - b);
      }
      g.gate_neg_w = matmul_tn(c.input, d_logit);
      g.gate_neg_b = column_sums(d_logit);
      dh += matmul_nt(d_logit, lp.gate_neg_w);
    }
  }
  return dh;
}

}  // namespace

ModelParams backward_logits(const ForwardTape& tape, const ModelParams& params,
                            const Matrix& grad_logits) {
  check_tape(tape, params, grad_logits);
  ModelParams grads = params.zeros_like();
  Matrix grad = grad_logits;
  switch (params.variant) {
    case Variant::Sgc:
      grads.layers[0].low = matmul_tn(tape.layers[0].propagated, grad);
      break;
    case Variant::Gcn:
      for (std::size_t l = params.layers.size(); l-- > 0;) {
        const LayerCache& c = tape.layers[l];
        if (c.relu)
          for (std::size_t i = 0; i < grad.size(); ++i)
            if (c.pre.data()[i] <= 0.0) grad.data()[i] = 0.0;
        grads.layers[l].low = matmul_tn(c.propagated, grad);
        if (l > 0) grad = tape.inputs.adjacency->multiply(matmul_nt(grad, params.layers[l].low));
      }
      break;
    case Variant::Nspgnn:
    case Variant::NspgnnWo:
      for (std::size_t l = params.layers.size(); l-- > 0;) {
        grad = nspgnn_layer_backward(tape.layers[l], params.layers[l], grads.layers[l],
                                     *tape.inputs.dual, tape.options, std::move(grad));
      }
      break;
  }
  return grads;
}

ModelParams backward(const ForwardTape& tape, const ModelParams& params, const Matrix& grad_probs) {
  check_tape(tape, params, grad_probs);
  // Softmax Jacobian per row: dZ = S (.) (dS - <dS, S>).
  Matrix dz(grad_probs.rows(), grad_probs.cols());
  for (std::size_t i = 0; i < dz.rows(); ++i) {
    const auto s = tape.probs.row(i);
    const auto ds = grad_probs.row(i);
    const double inner = kernels::dot(ds, s);
    auto out = dz.row(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = s[c] * (ds[c] - inner);
  }
  return backward_logits(tape, params, dz);
}

Graph nsp_sanitize(const Graph& g, const Matrix& x, const SanitizePolicy& policy,
                   std::span<const int> taus) {
  if (policy.keep_fraction.has_value() == policy.threshold.has_value()) {
    throw Error(ErrorCode::InvalidConfig, "sanitize needs exactly one of keep_fraction or threshold");
  }
  if (policy.keep_fraction && (*policy.keep_fraction < 0.0 || *policy.keep_fraction > 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "keep_fraction must lie in [0, 1]");
  }
  if (taus.empty()) throw Error(ErrorCode::InvalidConfig, "sanitize needs at least one tau");
  const auto& edges = g.edges();
  std::vector<double> score(edges.size(), 2.0);
  for (int tau : taus) {
    const SimilarityMatrix sim = similarity_matrix(g, x, tau);
    for (std::size_t e = 0; e < edges.size(); ++e)
      score[e] = std::min(score[e], sim(edges[e].first, edges[e].second));
  }
  std::vector<Edge> kept;
  if (policy.threshold) {
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (score[e] >= *policy.threshold) kept.push_back(edges[e]);
  } else {
    std::vector<std::size_t> order(edges.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    const auto n_keep = static_cast<std::size_t>(
        std::floor(*policy.keep_fraction * static_cast<double>(edges.size()) + 1e-9));
    for (std::size_t i = 0; i < n_keep; ++i) kept.push_back(edges[order[i]]);
  }
  if (kept.empty()) throw Error(ErrorCode::EmptyGraph, "sanitization removed every edge");
  return build_graph(kept, g.n_nodes());
}

}  // namespace nsp
