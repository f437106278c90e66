#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nsp::testing {

Graph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (coin(rng)) edges.emplace_back(u, v);
  return build_graph(edges, n);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = g(rng);
  return m;
}

LabelVector random_labels(std::size_t n, int c, std::mt19937_64& rng) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % static_cast<std::size_t>(c));
  std::shuffle(y.begin(), y.end(), rng);
  return make_labels(std::move(y), c);
}

Dataset random_dataset(std::size_t n, std::size_t p, int c, double edge_p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.graph = random_graph(n, edge_p, rng);
  d.features = random_matrix(n, p, rng);
  d.labels = random_labels(n, c, rng);
  d.split = stratified_split(d.labels, 0.4, 0.2, seed);
  return d;
}

Matrix dense_adjacency(const Graph& g) {
  Matrix a(g.n_nodes(), g.n_nodes());
  for (auto [u, v] : g.edges()) a(u, v) = a(v, u) = 1.0;
  return a;
}

Matrix dense_normalized(const Matrix& a) {
  const std::size_t n = a.rows();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = 1.0;
    for (std::size_t j = 0; j < n; ++j) d[i] += a(i, j);
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) / std::sqrt(d[i] * d[j]);
  return out;
}

Matrix dense_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Matrix dense_power_apply(const Matrix& a, const Matrix& x, int tau) {
  Matrix r = x;
  for (int t = 0; t < tau; ++t) r = dense_matmul(a, r);
  return r;
}

Matrix dense_softmax(const Matrix& z) {
  Matrix s(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double mx = z(i, 0);
    for (std::size_t c = 1; c < z.cols(); ++c) mx = std::max(mx, z(i, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) sum += (s(i, c) = std::exp(z(i, c) - mx));
    for (std::size_t c = 0; c < z.cols(); ++c) s(i, c) /= sum;
  }
  return s;
}

double dense_cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

double dense_attack_loss(const Matrix& a, const Matrix& x, const Matrix& w, int tau,
                         const LabelVector& y, const Mask& test) {
  const Matrix ahat = dense_normalized(a);
  const Matrix s = dense_softmax(dense_matmul(dense_power_apply(ahat, x, tau), w));
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.rows(); ++i)
    if (test[i]) {
      sum += std::log(s(i, static_cast<std::size_t>(y[i])));
      ++n;
    }
  return sum / static_cast<double>(n);
}

std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                      std::vector<double> params, double h) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + h;
    const double up = f(params);
    params[i] = orig - h;
    const double down = f(params);
    params[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

Graph permute_graph(const Graph& g, const std::vector<NodeId>& perm) {
  std::vector<Edge> edges;
  for (auto [u, v] : g.edges()) edges.emplace_back(perm[u], perm[v]);
  return build_graph(edges, g.n_nodes());
}

Matrix permute_rows(const Matrix& m, const std::vector<NodeId>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    std::copy(m.row(i).begin(), m.row(i).end(), out.row(perm[i]).begin());
  return out;
}

std::vector<NodeId> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<NodeId> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace nsp::testing
