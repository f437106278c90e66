#include "nsp/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nsp/error.hpp"
#include "nsp/kernels.hpp"

namespace nsp {

Matrix cosine_similarity(const Matrix& f) {
  const std::size_t n = f.rows();
  require_dense_capacity(n, "similarity matrix");
  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) norm[i] = std::sqrt(kernels::squared_norm(f.row(i)));

  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (norm[i] == 0.0) continue;
    s(i, i) = 1.0;
    const auto ri = f.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (norm[j] == 0.0) continue;
      double c = kernels::dot(ri, f.row(j)) / (norm[i] * norm[j]);
      c = std::clamp(c, -1.0, 1.0);
      s(i, j) = c;
      s(j, i) = c;
    }
  }
  return s;
}

SimilarityMatrix similarity_matrix(const Graph& g, const Matrix& x, int tau) {
  require_dense_capacity(g.n_nodes(), "similarity matrix");
  return SimilarityMatrix{cosine_similarity(powered_features(g, x, tau)), tau};
}

LinkScoreSets link_scores(const Graph& clean, const Graph& poisoned,
                          const SimilarityMatrix& sim) {
  if (clean.n_nodes() != poisoned.n_nodes() || sim.n() != clean.n_nodes()) {
    throw Error(ErrorCode::ShapeMismatch, "clean, poisoned and similarity sizes differ");
  }
  LinkScoreSets out;
  out.tau = sim.tau;
  // Both edge lists are sorted; a merge walk gives the three sets.
  const auto& ce = clean.edges();
  const auto& pe = poisoned.edges();
  std::size_t i = 0, j = 0;
  while (i < ce.size() || j < pe.size()) {
    if (j == pe.size() || (i < ce.size() && ce[i] < pe[j])) {
      out.removed.push_back(sim(ce[i].first, ce[i].second));
      out.removed_edges.push_back(ce[i]);
      ++i;
    } else if (i == ce.size() || pe[j] < ce[i]) {
      out.malicious.push_back(sim(pe[j].first, pe[j].second));
      out.malicious_edges.push_back(pe[j]);
      ++j;
    } else {
      out.benign.push_back(sim(pe[j].first, pe[j].second));
      ++i;
      ++j;
    }
  }
  return out;
}

std::vector<double> smoothed_histogram(std::span<const double> samples, int n_bins,
                                       double smoothing) {
  if (n_bins < 1) throw Error(ErrorCode::InvalidConfig, "histogram needs at least one bin");
  if (smoothing < 0.0) throw Error(ErrorCode::InvalidConfig, "negative smoothing");
  if (samples.empty()) throw Error(ErrorCode::EmptyDistribution, "empty score sample");
  std::vector<double> h(static_cast<std::size_t>(n_bins), 0.0);
  for (double s : samples) {
    if (!std::isfinite(s) || std::abs(s) > 1.0 + 1e-9) {
      throw Error(ErrorCode::InvalidConfig, "score outside [-1, 1]: " + std::to_string(s));
    }
    auto b = static_cast<int>(std::floor((s + 1.0) * 0.5 * n_bins));
    b = std::clamp(b, 0, n_bins - 1);
    h[static_cast<std::size_t>(b)] += 1.0;
  }
  const double total = static_cast<double>(samples.size());
  double z = 0.0;
  for (double& v : h) {
    v = v / total + smoothing;
    z += v;
  }
  for (double& v : h) v /= z;
  return h;
}

double kl_divergence(std::span<const double> p_samples, std::span<const double> q_samples,
                     int n_bins, double smoothing) {
  const auto p = smoothed_histogram(p_samples, n_bins, smoothing);
  const auto q = smoothed_histogram(q_samples, n_bins, smoothing);
  double kl = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    if (p[b] > 0.0) kl += p[b] * std::log(p[b] / q[b]);
  }
  return std::max(kl, 0.0);
}

std::vector<SeparationRow> separation_report(const Graph& clean, const Graph& poisoned,
                                             const Matrix& x, std::span<const int> tau_list,
                                             int n_bins, double smoothing) {
  if (tau_list.empty()) throw Error(ErrorCode::InvalidConfig, "tau list is empty");
  std::vector<SeparationRow> rows;
  for (int tau : tau_list) {
    SeparationRow row;
    row.tau = tau;
    row.scores = link_scores(clean, poisoned, similarity_matrix(poisoned, x, tau));
    if (row.scores.malicious.empty()) {
      row.error = "no malicious links: poisoned graph adds no edges";
    } else if (row.scores.benign.empty()) {
      row.error = "no benign links survive in the poisoned graph";
    } else {
      row.kl = kl_divergence(row.scores.malicious, row.scores.benign, n_bins, smoothing);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace nsp
