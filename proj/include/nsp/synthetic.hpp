#pragma once

#include <cstdint>

#include "nsp/graph.hpp"

namespace nsp {

// Contextual-SBM-style dataset with a controllable edge homophily.
struct SyntheticSpec {
  std::size_t n_nodes = 1000;
  int n_classes = 5;
  double mean_degree = 10.0;
  double homophily = 0.2;
  std::size_t feature_dim = 32;
  double class_separation = 1.0;  // mu: length of each class-mean vector
  double feature_noise = 1.0;     // sigma_f: isotropic Gaussian noise
  std::uint64_t seed = 0;
  double train_fraction = 0.1;
  double val_fraction = 0.1;
};

void validate_spec(const SyntheticSpec& spec);

// Labels are balanced to within one node per class. Each of round(n*d/2)
// edges joins a uniformly chosen node to a same-class partner with
// probability h, else to a node of a uniformly chosen other class.
// Throws InvalidSpec on an infeasible spec.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace nsp
