#include "nsp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "nsp/error.hpp"
#include "nsp/kernels.hpp"

namespace nsp {

void validate_spec(const SyntheticSpec& s) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); };
  if (s.n_classes < 2) fail("need at least two classes");
  if (s.n_nodes < static_cast<std::size_t>(s.n_classes)) fail("fewer nodes than classes");
  if (!(s.mean_degree >= 1.0)) fail("mean degree must be >= 1");
  if (s.mean_degree >= static_cast<double>(s.n_nodes)) fail("mean degree must be < n_nodes");
  if (!(s.homophily >= 0.0 && s.homophily <= 1.0)) fail("homophily must lie in [0, 1]");
  if (!(s.class_separation >= 0.0) || !(s.feature_noise >= 0.0)) fail("mu and sigma must be >= 0");
  if (s.feature_dim == 0) fail("feature_dim must be positive");

  // Enough distinct pairs of each kind to place the requested edges.
  const double n = static_cast<double>(s.n_nodes);
  const double per_class = n / s.n_classes;
  const double intra_pairs = s.n_classes * per_class * (per_class - 1.0) / 2.0;
  const double inter_pairs = n * (n - 1.0) / 2.0 - intra_pairs;
  const double m = std::round(n * s.mean_degree / 2.0);
  if (s.homophily > 0.0 && s.homophily * m > 0.9 * intra_pairs) fail("too many intra-class edges requested");
  if (s.homophily < 1.0 && (1.0 - s.homophily) * m > 0.9 * inter_pairs) fail("too many inter-class edges requested");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  const std::size_t n = spec.n_nodes;
  const auto c = static_cast<std::size_t>(spec.n_classes);
  std::mt19937_64 rng(spec.seed);

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c);
  std::shuffle(labels.begin(), labels.end(), rng);
  std::vector<std::vector<NodeId>> members(c);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(static_cast<NodeId>(i));

  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.mean_degree / 2.0));
  std::set<Edge> edges;
  std::uniform_int_distribution<std::size_t> pick_node(0, n - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, c - 2);
  std::bernoulli_distribution same(spec.homophily);
  std::size_t attempts = 0;
  while (edges.size() < target) {
    if (++attempts > 100 * target + 1000) throw Error(ErrorCode::InvalidSpec, "edge sampling did not converge");
    const auto u = static_cast<NodeId>(pick_node(rng));
    const auto cu = static_cast<std::size_t>(labels[u]);
    std::size_t cv = cu;
    if (!same(rng)) {
      cv = pick_other(rng);
      if (cv >= cu) ++cv;
    }
    const auto& pool = members[cv];
    const NodeId v = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    if (u == v) continue;
    edges.emplace(std::min(u, v), std::max(u, v));
  }
  const std::vector<Edge> edge_list(edges.begin(), edges.end());

  // Class means: Gram-Schmidt on Gaussian directions when p >= C, otherwise
  // plain random unit vectors.
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix means(c, spec.feature_dim);
  for (std::size_t k = 0; k < c; ++k) {
    auto row = means.row(k);
    for (double& v : row) v = gauss(rng);
    if (spec.feature_dim >= c) {
      for (std::size_t j = 0; j < k; ++j) kernels::axpy(-kernels::dot(row, means.row(j)), means.row(j), row);
    }
    const double norm = std::sqrt(kernels::squared_norm(row));
    for (double& v : row) v *= spec.class_separation / norm;
  }
  Matrix x(n, spec.feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    for (double& v : row) v = spec.feature_noise * gauss(rng);
    kernels::axpy(1.0, means.row(static_cast<std::size_t>(labels[i])), row);
  }

  Dataset d;
  d.graph = build_graph(edge_list, n);
  d.features = std::move(x);
  d.labels = make_labels(std::move(labels), spec.n_classes);
  d.split = stratified_split(d.labels, spec.train_fraction, spec.val_fraction, spec.seed ^ 0x5eedULL);
  return d;
}

}  // namespace nsp
