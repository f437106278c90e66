#pragma once

// Desk-scale structural poisoning against an SGC surrogate:
//   * brute_force_attack  greedy exact oracle, retraining the surrogate for
//                         every candidate flip (small graphs only)
//   * gradient_attack     one-shot first-order attacker on the dense
//                         relaxation of A with surrogate weights held fixed
//   * kernel_verification correlation between the powered-feature Gram
//                         kernel K = A^tau X (A^tau X)^T and oracle loss changes

#include <cstdint>
#include <optional>
#include <vector>

#include "nsp/graph.hpp"
#include "nsp/model.hpp"

namespace nsp {

enum class AttackMode { AddOnly, Flip };

std::string_view to_string(AttackMode m) noexcept;
AttackMode parse_attack_mode(std::string_view name);

struct AttackConfig {
  double budget_fraction = 0.05;  // flips = floor(budget_fraction * |E|)
  AttackMode mode = AttackMode::AddOnly;
  int surrogate_tau = 2;
  std::size_t max_nodes = 200;            // brute-force node cap
  std::size_t surrogate_epochs = 200;     // inner retraining budget
  double surrogate_lr = 0.01;
  std::uint64_t seed = 0;
};

std::size_t attack_budget(const Graph& g, double budget_fraction);

struct Flip {
  NodeId u = 0;
  NodeId v = 0;
  bool added = true;
  double delta_loss = 0.0;  // change in L_atk caused by this flip
  double kernel = 0.0;      // K[u, v] on the clean graph
};

struct CorrelationStats {
  std::optional<double> pearson;
  std::optional<double> spearman;
  bool degenerate = false;  // a constant input makes correlation undefined
  std::size_t n = 0;
};

struct AttackReport {
  std::vector<Flip> flips;
  std::vector<Flip> candidates;  // scored candidate additions (first step)
  CorrelationStats correlation;  // K vs delta_loss over `candidates`
  double clean_loss = 0.0;       // L_atk on the clean graph
  double final_loss = 0.0;       // L_atk on the poisoned graph
  Graph poisoned;
};

// K = A^tau X (A^tau X)^T with the raw binary adjacency.
Matrix attack_kernel(const Graph& g, const Matrix& x, int tau);

// Logistic regression on A-hat^tau X restricted to the training rows; this is
// the surrogate's inner problem. Deterministic given cfg.seed.
ModelParams fit_surrogate(const Dataset& data, const AttackConfig& cfg);
ModelParams fit_surrogate(const Matrix& propagated, const LabelVector& y, const Mask& train,
                          const AttackConfig& cfg);

// -NLL on the test nodes of the SGC surrogate evaluated on g.
double attack_loss(const Graph& g, const Matrix& x, const LabelVector& y, const DataSplit& split,
                   const ModelParams& surrogate);

// Greedy oracle: every step retrains the surrogate on each candidate graph
// and applies the flip with the smallest L_atk (ties: lowest (u, v)).
AttackReport brute_force_attack(const Dataset& data, const AttackConfig& cfg);

// dL_atk / dA over the dense relaxation, chain rule through normalization.
Matrix attack_gradient(const Graph& g, const Matrix& x, const LabelVector& y,
                       const DataSplit& split, const ModelParams& surrogate);

AttackReport gradient_attack(const Dataset& data, const AttackConfig& cfg);

// Applies symmetric flips to g.
Graph apply_flips(const Graph& g, const std::vector<Flip>& flips);

double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);
CorrelationStats correlate(std::span<const double> a, std::span<const double> b);

struct KernelVerification {
  CorrelationStats correlation;     // K[u,v] vs oracle delta L over additions
  double chosen_mean_similarity = 0.0;     // mean cos(A^tau X) over chosen edges
  double candidate_mean_similarity = 0.0;  // same over every candidate addition
  std::vector<Flip> candidates;
  std::vector<Flip> chosen;
};

KernelVerification kernel_verification(const Dataset& data, int tau, const AttackConfig& cfg);

}  // namespace nsp
