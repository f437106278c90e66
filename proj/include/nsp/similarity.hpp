#pragma once

// Neighbor-feature cosine similarity and the malicious/benign link separation
// analysis built on it.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsp/graph.hpp"
#include "nsp/matrix.hpp"

namespace nsp {

struct SimilarityMatrix {
  Matrix values;  // N x N, symmetric, entries in [-1, 1]
  int tau = 0;

  double operator()(std::size_t i, std::size_t j) const noexcept { return values(i, j); }
  std::size_t n() const noexcept { return values.rows(); }
};

// Row-wise cosine similarity of an arbitrary feature matrix. Rows with zero
// norm have similarity 0 with everything, themselves included.
Matrix cosine_similarity(const Matrix& features);

// Cosine similarity of the rows of A^tau X. Throws CapacityExceeded above the
// dense cap.
SimilarityMatrix similarity_matrix(const Graph& g, const Matrix& x, int tau);

struct LinkScoreSets {
  std::vector<double> benign;     // edges in both graphs
  std::vector<double> malicious;  // edges only in the poisoned graph
  std::vector<double> removed;    // edges only in the clean graph
  std::vector<Edge> malicious_edges;
  std::vector<Edge> removed_edges;
  int tau = 0;
};

LinkScoreSets link_scores(const Graph& clean, const Graph& poisoned, const SimilarityMatrix& sim);

inline constexpr int kDefaultKlBins = 50;
inline constexpr double kDefaultKlSmoothing = 1e-6;

// KL(p || q) between smoothed histograms of two score samples over a shared
// uniform binning of [-1, 1]. Throws EmptyDistribution on an empty sample.
double kl_divergence(std::span<const double> p_samples, std::span<const double> q_samples,
                     int n_bins = kDefaultKlBins, double smoothing = kDefaultKlSmoothing);

// Normalized, smoothed histogram used by kl_divergence.
std::vector<double> smoothed_histogram(std::span<const double> samples, int n_bins,
                                       double smoothing);

struct SeparationRow {
  int tau = 0;
  std::optional<double> kl;  // KL(malicious || benign); empty on error
  std::string error;
  LinkScoreSets scores;
};

std::vector<SeparationRow> separation_report(const Graph& clean, const Graph& poisoned,
                                             const Matrix& x, std::span<const int> tau_list,
                                             int n_bins = kDefaultKlBins,
                                             double smoothing = kDefaultKlSmoothing);

}  // namespace nsp
