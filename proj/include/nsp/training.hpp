#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nsp/dual_knn.hpp"
#include "nsp/graph.hpp"
#include "nsp/model.hpp"

namespace nsp {

// -mean over masked nodes of ln S[i, y_i]. Throws EmptyMask.
double nll_loss(const Matrix& probs, const LabelVector& y, const Mask& mask);

// dL/dZ of the masked mean NLL through the softmax: (S - Y) / |mask| on
// masked rows, zero elsewhere.
Matrix nll_grad_logits(const Matrix& probs, const LabelVector& y, const Mask& mask);

// dL/dS of the masked mean NLL.
Matrix nll_grad_probs(const Matrix& probs, const LabelVector& y, const Mask& mask);

// Fraction of masked nodes whose argmax (lowest class on ties) is correct.
double accuracy(const Matrix& probs, const LabelVector& y, const Mask& mask);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update in place. Throws NonFiniteGradient.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, const AdamConfig& cfg = {});

struct TrainConfig {
  double lr = 0.01;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  std::size_t k_pos = 10;
  std::size_t k_neg = 10;
  Variant variant = Variant::Nspgnn;
  std::vector<std::size_t> hidden{64};
  std::optional<std::size_t> patience;  // none: run every epoch
  std::vector<int> taus{1, 2};
  int sgc_tau = 2;
};

void validate_config(const TrainConfig& cfg);

struct TrainResult {
  ModelParams best_params;    // at the best validation epoch
  ModelParams final_params;
  std::vector<double> train_loss;
  std::vector<double> val_accuracy;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
  double seconds = 0.0;
};

// Full-batch training with Adam; keeps the epoch with the highest validation
// accuracy (lowest validation loss among equals) and reports test accuracy for it. `dual` is required
// for the nspgnn variants.
TrainResult train(const Dataset& data, const DualKnnGraphs* dual, const TrainConfig& cfg);

// Lower level entry used by the attack harness: trains on explicit inputs.
TrainResult train(const ModelInputs& inputs, const LabelVector& y, const DataSplit& split,
                  ModelParams init, const TrainConfig& cfg);

}  // namespace nsp
