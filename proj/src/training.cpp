#include "nsp/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "nsp/error.hpp"

namespace nsp {
namespace {

std::size_t require_mask(const Matrix& probs, const LabelVector& y, const Mask& mask) {
  if (mask.size() != probs.rows() || y.size() != probs.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "mask, labels and predictions differ in length");
  }
  const std::size_t n = mask_count(mask);
  if (n == 0) throw Error(ErrorCode::EmptyMask, "mask selects no nodes");
  return n;
}

}  // namespace

double nll_loss(const Matrix& probs, const LabelVector& y, const Mask& mask) {
  const std::size_t n = require_mask(probs, y, mask);
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i)
    if (mask[i]) sum -= std::log(probs(i, static_cast<std::size_t>(y[i])));
  return sum / static_cast<double>(n);
}

Matrix nll_grad_logits(const Matrix& probs, const LabelVector& y, const Mask& mask) {
  const double inv = 1.0 / static_cast<double>(require_mask(probs, y, mask));
  Matrix g(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t c = 0; c < probs.cols(); ++c) g(i, c) = probs(i, c) * inv;
    g(i, static_cast<std::size_t>(y[i])) -= inv;
  }
  return g;
}

Matrix nll_grad_probs(const Matrix& probs, const LabelVector& y, const Mask& mask) {
  const double inv = 1.0 / static_cast<double>(require_mask(probs, y, mask));
  Matrix g(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!mask[i]) continue;
    const auto c = static_cast<std::size_t>(y[i]);
    g(i, c) = -inv / probs(i, c);
  }
  return g;
}

double accuracy(const Matrix& probs, const LabelVector& y, const Mask& mask) {
  const std::size_t n = require_mask(probs, y, mask);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!mask[i]) continue;
    const auto r = probs.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < r.size(); ++c)
      if (r[c] > r[best]) best = c;
    correct += (static_cast<int>(best) == y[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam state, params and grads differ in size");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw Error(ErrorCode::NonFiniteGradient,
                  "gradient entry " + std::to_string(i) + " is " + std::to_string(grads[i]) +
                      " at step " + std::to_string(state.t + 1));
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void validate_config(const TrainConfig& cfg) {
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw Error(ErrorCode::InvalidConfig, "lr must be >= 0");
  if (cfg.epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
  if (cfg.k_pos < 1 || cfg.k_neg < 1) throw Error(ErrorCode::InvalidConfig, "k1, k2 must be >= 1");
  if (cfg.taus.empty()) throw Error(ErrorCode::InvalidConfig, "taus must be non-empty");
}

TrainResult train(const ModelInputs& inputs, const LabelVector& y, const DataSplit& split,
                  ModelParams init, const TrainConfig& cfg) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  TrainResult r;
  ModelParams params = std::move(init);
  std::vector<double> flat = params.flatten();
  AdamState adam(flat.size());
  const bool has_val = mask_count(split.val) > 0;
  const Mask& select_mask = has_val ? split.val : split.train;

  double best = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  r.best_params = params;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const ForwardTape tape = forward(params, inputs);
    const double loss = nll_loss(tape.probs, y, split.train);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::NonFiniteGradient, "training loss diverged at epoch " + std::to_string(epoch));
    }
    const double val_acc = accuracy(tape.probs, y, select_mask);
    const double val_loss = nll_loss(tape.probs, y, select_mask);
    r.train_loss.push_back(loss);
    r.val_accuracy.push_back(val_acc);
    r.val_loss.push_back(val_loss);
    // Equal accuracy on a small validation set is common; lower loss breaks the tie.
    if (val_acc > best || (val_acc == best && val_loss < best_loss)) {
      if (val_acc > best) since_best = 0;
      best = val_acc;
      best_loss = val_loss;
      r.best_epoch = epoch;
      r.best_params = params;
    } else if (cfg.patience && ++since_best > *cfg.patience) {
      break;
    }
    const ModelParams grads = backward_logits(tape, params, nll_grad_logits(tape.probs, y, split.train));
    const std::vector<double> g = grads.flatten();
    adam_step(adam, flat, g, cfg.lr);
    params.assign_flat(flat);
  }
  r.final_params = std::move(params);
  r.best_val_accuracy = best;
  const Matrix probs = forward(r.best_params, inputs).probs;
  r.train_accuracy = accuracy(probs, y, split.train);
  r.test_accuracy = mask_count(split.test) > 0 ? accuracy(probs, y, split.test) : 0.0;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

TrainResult train(const Dataset& data, const DualKnnGraphs* dual, const TrainConfig& cfg) {
  validate_config(cfg);
  if (needs_dual(cfg.variant) && dual == nullptr) {
    throw Error(ErrorCode::MissingDualGraphs, "nspgnn variants need dual kNN graphs");
  }
  std::vector<std::size_t> dims{data.features.cols()};
  if (cfg.variant != Variant::Sgc) dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(static_cast<std::size_t>(data.labels.n_classes));
  const std::size_t n_gates = dual ? dual->taus.size() : cfg.taus.size();
  ModelParams init = init_params(cfg.variant, dims, cfg.seed, n_gates, cfg.sgc_tau);

  ModelInputs inputs;
  inputs.features = &data.features;
  inputs.dual = dual;
  SparseMatrix adj;
  Matrix propagated;
  if (!needs_dual(cfg.variant)) {
    adj = normalized_adjacency(data.graph);
    inputs.adjacency = &adj;
    if (cfg.variant == Variant::Sgc) {
      propagated = sgc_propagate(adj, data.features, cfg.sgc_tau);
      inputs.sgc_propagated = &propagated;
    }
  }
  return train(inputs, data.labels, data.split, std::move(init), cfg);
}

}  // namespace nsp
