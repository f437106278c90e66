#include "nsp/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nsp/error.hpp"
#include "nsp/kernels.hpp"
#include "nsp/similarity.hpp"
#include "nsp/training.hpp"

namespace nsp {

std::string_view to_string(AttackMode m) noexcept {
  return m == AttackMode::AddOnly ? "add_only" : "flip";
}

AttackMode parse_attack_mode(std::string_view name) {
  if (name == "add_only") return AttackMode::AddOnly;
  if (name == "flip") return AttackMode::Flip;
  throw Error(ErrorCode::InvalidConfig, "unknown attack mode '" + std::string(name) + "'");
}

std::size_t attack_budget(const Graph& g, double budget_fraction) {
  if (!(budget_fraction >= 0.0 && budget_fraction <= 0.5)) {
    throw Error(ErrorCode::InvalidConfig, "budget fraction must lie in [0, 0.5]");
  }
  return static_cast<std::size_t>(
      std::floor(budget_fraction * static_cast<double>(g.n_edges()) + 1e-9));
}

Matrix attack_kernel(const Graph& g, const Matrix& x, int tau) {
  require_dense_capacity(g.n_nodes(), "attack kernel");
  const Matrix f = powered_features(g, x, tau);
  return matmul_nt(f, f);
}

ModelParams fit_surrogate(const Matrix& propagated, const LabelVector& y, const Mask& train,
                          const AttackConfig& cfg) {
  const std::size_t p = propagated.cols();
  const auto c = static_cast<std::size_t>(y.n_classes);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train[i]) rows.push_back(i);
  if (rows.empty()) throw Error(ErrorCode::EmptyMask, "surrogate needs training nodes");

  Matrix ft(rows.size(), p);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy_n(propagated.row(rows[r]).begin(), p, ft.row(r).begin());

  const std::size_t dims[] = {p, c};
  ModelParams params = init_params(Variant::Sgc, dims, cfg.seed, 2, cfg.surrogate_tau);
  Matrix& w = params.layers[0].low;
  AdamState adam(w.size());
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t epoch = 0; epoch < cfg.surrogate_epochs; ++epoch) {
    Matrix g = softmax_rows(matmul(ft, w));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (double& v : g.row(r)) v *= inv;
      g(r, static_cast<std::size_t>(y[rows[r]])) -= inv;
    }
    const Matrix dw = matmul_tn(ft, g);
    adam_step(adam, w.data(), dw.data(), cfg.surrogate_lr);
  }
  return params;
}

ModelParams fit_surrogate(const Dataset& data, const AttackConfig& cfg) {
  const Matrix f = sgc_propagate(normalized_adjacency(data.graph), data.features, cfg.surrogate_tau);
  return fit_surrogate(f, data.labels, data.split.train, cfg);
}

namespace {

double test_loss_from_propagated(const Matrix& propagated, const LabelVector& y,
                                 const Mask& test, const Matrix& w) {
  std::size_t n = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < propagated.rows(); ++i) {
    if (!test[i]) continue;
    Matrix z(1, w.cols());
    for (std::size_t k = 0; k < w.rows(); ++k) kernels::axpy(propagated(i, k), w.row(k), z.row(0));
    const Matrix s = softmax_rows(z);
    sum -= std::log(s(0, static_cast<std::size_t>(y[i])));
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyMask, "attack loss needs test nodes");
  return -sum / static_cast<double>(n);
}

Graph with_toggled(const Graph& g, NodeId u, NodeId v) {
  std::vector<Edge> edges = g.edges();
  const Edge e{std::min(u, v), std::max(u, v)};
  const auto it = std::lower_bound(edges.begin(), edges.end(), e);
  if (it != edges.end() && *it == e) {
    edges.erase(it);
  } else {
    edges.insert(it, e);
  }
  return build_graph(edges, g.n_nodes());
}

// Retrain the surrogate on g and return L_atk there.
double oracle_loss(const Graph& g, const Dataset& data, const AttackConfig& cfg) {
  const Matrix f = sgc_propagate(normalized_adjacency(g), data.features, cfg.surrogate_tau);
  const ModelParams s = fit_surrogate(f, data.labels, data.split.train, cfg);
  return test_loss_from_propagated(f, data.labels, data.split.test, s.layers[0].low);
}

double row_dot(const Matrix& f, NodeId u, NodeId v) { return kernels::dot(f.row(u), f.row(v)); }

std::vector<Edge> candidate_pairs(const Graph& g, AttackMode mode) {
  std::vector<Edge> out;
  const auto n = static_cast<NodeId>(g.n_nodes());
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (mode == AttackMode::Flip || !g.has_edge(u, v)) out.emplace_back(u, v);
  return out;
}

CorrelationStats addition_correlation(const std::vector<Flip>& candidates) {
  std::vector<double> k, dl;
  for (const Flip& f : candidates) {
    if (!f.added) continue;
    k.push_back(f.kernel);
    dl.push_back(f.delta_loss);
  }
  return correlate(k, dl);
}

}  // namespace

double attack_loss(const Graph& g, const Matrix& x, const LabelVector& y, const DataSplit& split,
                   const ModelParams& surrogate) {
  if (surrogate.variant != Variant::Sgc) throw Error(ErrorCode::InvalidConfig, "surrogate must be sgc");
  const Matrix f = sgc_propagate(normalized_adjacency(g), x, surrogate.sgc_tau);
  return test_loss_from_propagated(f, y, split.test, surrogate.layers[0].low);
}

Graph apply_flips(const Graph& g, const std::vector<Flip>& flips) {
  std::vector<Edge> edges = g.edges();
  for (const Flip& f : flips) {
    const Edge e{std::min(f.u, f.v), std::max(f.u, f.v)};
    if (f.added) {
      edges.push_back(e);
    } else {
      edges.erase(std::remove(edges.begin(), edges.end(), e), edges.end());
    }
  }
  return build_graph(edges, g.n_nodes());
}

AttackReport brute_force_attack(const Dataset& data, const AttackConfig& cfg) {
  const std::size_t n = data.n_nodes();
  if (n > cfg.max_nodes) {
    throw Error(ErrorCode::CapacityExceeded, "brute-force attack limited to " +
                                                 std::to_string(cfg.max_nodes) + " nodes, got " +
                                                 std::to_string(n));
  }
  const std::size_t budget = attack_budget(data.graph, cfg.budget_fraction);
  const Matrix kernel_features = powered_features(data.graph, data.features, cfg.surrogate_tau);

  AttackReport report;
  Graph current = data.graph;
  double current_loss = oracle_loss(current, data, cfg);
  report.clean_loss = current_loss;
  for (std::size_t step = 0; step < budget; ++step) {
    const auto pairs = candidate_pairs(current, cfg.mode);
    if (pairs.empty()) throw Error(ErrorCode::InvalidConfig, "no candidate flips left");
    std::optional<Flip> best;
    double best_loss = 0.0;
    for (auto [u, v] : pairs) {
      const Graph trial = with_toggled(current, u, v);
      const double loss = oracle_loss(trial, data, cfg);
      Flip f{u, v, !current.has_edge(u, v), loss - current_loss, row_dot(kernel_features, u, v)};
      if (step == 0) report.candidates.push_back(f);
      if (!best || loss < best_loss) {
        best = f;
        best_loss = loss;
      }
    }
    report.flips.push_back(*best);
    current = with_toggled(current, best->u, best->v);
    current_loss = best_loss;
  }
  report.final_loss = current_loss;
  report.correlation = addition_correlation(report.candidates);
  report.poisoned = std::move(current);
  return report;
}

Matrix attack_gradient(const Graph& g, const Matrix& x, const LabelVector& y,
                       const DataSplit& split, const ModelParams& surrogate) {
  const std::size_t n = g.n_nodes();
  require_dense_capacity(n, "attack gradient");
  const int tau = surrogate.sgc_tau;
  const Matrix& w = surrogate.layers[0].low;
  const SparseMatrix adj = normalized_adjacency(g);

  // M_k = A-hat^k X W for k = 0..tau; logits Z = M_tau.
  std::vector<Matrix> m{matmul(x, w)};
  for (int k = 0; k < tau; ++k) m.push_back(adj.multiply(m.back()));
  const Matrix probs = softmax_rows(m.back());
  // L_atk = -NLL(test)  =>  dL_atk/dZ = -(S - Y)/|test|.
  Matrix grad = nll_grad_logits(probs, y, split.test);
  grad *= -1.0;

  // dL/dA-hat = sum_k A-hat^{tau-1-k} G M_k^T.
  Matrix d_ahat(n, n);
  std::vector<Matrix> back{grad};
  for (int k = 1; k < tau; ++k) back.push_back(adj.multiply(back.back()));
  for (int k = 0; k < tau; ++k) d_ahat += matmul_nt(back[static_cast<std::size_t>(tau - 1 - k)], m[static_cast<std::size_t>(k)]);

  std::vector<double> deg(n), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    deg[i] = static_cast<double>(g.degree(static_cast<NodeId>(i)) + 1);
    r[i] = 1.0 / std::sqrt(deg[i]);
  }
  // Only nonzero entries of A-hat contribute to the degree terms.
  std::vector<double> d_deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = adj.row_ptr[i]; e < adj.row_ptr[i + 1]; ++e) {
      const std::size_t j = adj.col[e];
      const double contrib = d_ahat(i, j) * adj.val[e];
      d_deg[i] += contrib;
      d_deg[j] += contrib;
    }
  }
  for (std::size_t i = 0; i < n; ++i) d_deg[i] *= -0.5 / deg[i];

  Matrix d_tilde(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d_tilde(i, j) = d_ahat(i, j) * r[i] * r[j] + d_deg[i];

  // A_uv and A_vu move together.
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = i == j ? 0.0 : d_tilde(i, j) + d_tilde(j, i);
  return out;
}

AttackReport gradient_attack(const Dataset& data, const AttackConfig& cfg) {
  const std::size_t budget = attack_budget(data.graph, cfg.budget_fraction);
  const ModelParams surrogate = fit_surrogate(data, cfg);
  const Matrix grad = attack_gradient(data.graph, data.features, data.labels, data.split, surrogate);
  const Matrix kernel_features = powered_features(data.graph, data.features, cfg.surrogate_tau);

  struct Scored {
    double score;
    Edge e;
  };
  std::vector<Scored> scored;
  AttackReport report;
  const auto n = static_cast<NodeId>(data.n_nodes());
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      const bool present = data.graph.has_edge(u, v);
      if (present && cfg.mode == AttackMode::AddOnly) continue;
      const double s = (present ? -1.0 : 1.0) * grad(u, v);
      scored.push_back({s, {u, v}});
      if (!present) report.candidates.push_back({u, v, true, s, row_dot(kernel_features, u, v)});
    }
  }
  if (scored.size() < budget) throw Error(ErrorCode::InvalidConfig, "budget exceeds candidate flips");
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(budget), scored.end(),
                    [](const Scored& a, const Scored& b) {
                      return a.score != b.score ? a.score < b.score : a.e < b.e;
                    });

  report.clean_loss = attack_loss(data.graph, data.features, data.labels, data.split, surrogate);
  for (std::size_t i = 0; i < budget; ++i) {
    const auto [u, v] = scored[i].e;
    const bool added = !data.graph.has_edge(u, v);
    const double loss = attack_loss(with_toggled(data.graph, u, v), data.features, data.labels,
                                    data.split, surrogate);
    report.flips.push_back({u, v, added, loss - report.clean_loss, row_dot(kernel_features, u, v)});
  }
  report.poisoned = apply_flips(data.graph, report.flips);
  report.final_loss = attack_loss(report.poisoned, data.features, data.labels, data.split, surrogate);
  report.correlation = addition_correlation(report.candidates);
  return report;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::ShapeMismatch, "correlation inputs");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

namespace {
std::vector<double> average_ranks(std::span<const double> a) {
  std::vector<std::size_t> idx(a.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return a[i] < a[j]; });
  std::vector<double> rank(a.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && a[idx[j + 1]] == a[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}
}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

CorrelationStats correlate(std::span<const double> a, std::span<const double> b) {
  CorrelationStats s;
  s.n = a.size();
  if (a.size() < 2) {
    s.degenerate = true;
    return s;
  }
  const double p = pearson(a, b);
  if (std::isnan(p)) {
    s.degenerate = true;
    return s;
  }
  s.pearson = p;
  s.spearman = spearman(a, b);
  return s;
}

KernelVerification kernel_verification(const Dataset& data, int tau, const AttackConfig& cfg) {
  if (data.n_nodes() > cfg.max_nodes) {
    throw Error(ErrorCode::CapacityExceeded, "kernel verification limited to " +
                                                 std::to_string(cfg.max_nodes) + " nodes");
  }
  AttackConfig add_cfg = cfg;
  add_cfg.mode = AttackMode::AddOnly;
  const AttackReport oracle = brute_force_attack(data, add_cfg);

  const Matrix f = powered_features(data.graph, data.features, tau);
  const Matrix omega = cosine_similarity(f);
  KernelVerification out;
  std::vector<double> k, dl;
  double sim_sum = 0.0;
  // Step-one candidates exist only when the budget is positive; otherwise
  // score the pool directly.
  std::vector<Flip> pool = oracle.candidates;
  if (pool.empty()) {
    const double base = oracle_loss(data.graph, data, cfg);
    for (auto [u, v] : candidate_pairs(data.graph, AttackMode::AddOnly))
      pool.push_back({u, v, true, oracle_loss(with_toggled(data.graph, u, v), data, cfg) - base, 0.0});
  }
  for (Flip c : pool) {
    c.kernel = row_dot(f, c.u, c.v);
    k.push_back(c.kernel);
    dl.push_back(c.delta_loss);
    sim_sum += omega(c.u, c.v);
    out.candidates.push_back(c);
  }
  out.correlation = correlate(k, dl);
  out.candidate_mean_similarity = pool.empty() ? 0.0 : sim_sum / static_cast<double>(pool.size());
  double chosen_sum = 0.0;
  for (Flip c : oracle.flips) {
    c.kernel = row_dot(f, c.u, c.v);
    chosen_sum += omega(c.u, c.v);
    out.chosen.push_back(c);
  }
  out.chosen_mean_similarity =
      oracle.flips.empty() ? 0.0 : chosen_sum / static_cast<double>(oracle.flips.size());
  return out;
}

}  // namespace nsp
