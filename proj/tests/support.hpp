#pragma once

// Test-only oracles. Everything here is written against dense matrices and
// plain loops so it stays independent of the sparse / SIMD code paths.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "nsp/dual_knn.hpp"
#include "nsp/graph.hpp"
#include "nsp/model.hpp"

namespace nsp::testing {

Graph random_graph(std::size_t n, double p, std::mt19937_64& rng);
Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0);
LabelVector random_labels(std::size_t n, int c, std::mt19937_64& rng);

// Small random dataset; every class appears in train.
Dataset random_dataset(std::size_t n, std::size_t p, int c, double edge_p, std::uint64_t seed);

Matrix dense_adjacency(const Graph& g);
Matrix dense_normalized(const Matrix& a);  // D~^{-1/2}(A+I)D~^{-1/2} on a dense (weighted) A
Matrix dense_matmul(const Matrix& a, const Matrix& b);
Matrix dense_power_apply(const Matrix& a, const Matrix& x, int tau);
Matrix dense_softmax(const Matrix& z);
double dense_cosine(std::span<const double> a, std::span<const double> b);

// L_atk = -mean_test NLL of softmax(A-hat^tau X W) for a dense weighted A.
double dense_attack_loss(const Matrix& a, const Matrix& x, const Matrix& w, int tau,
                         const LabelVector& y, const Mask& test);

// Central finite-difference gradient of f at params (flat), step h.
std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                      std::vector<double> params, double h = 1e-5);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6);

// Apply a node permutation (new index perm[i] for old node i).
Graph permute_graph(const Graph& g, const std::vector<NodeId>& perm);
Matrix permute_rows(const Matrix& m, const std::vector<NodeId>& perm);
std::vector<NodeId> random_permutation(std::size_t n, std::mt19937_64& rng);

}  // namespace nsp::testing
