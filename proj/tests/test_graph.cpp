#include <doctest.h>

#include <cmath>
#include <random>

#include "nsp/error.hpp"
#include "nsp/graph.hpp"
#include "support.hpp"

using namespace nsp;
using namespace nsp::testing;

TEST_CASE("build_graph: empty, symmetric, deduplicated") {
  const Graph empty = build_graph({}, 3);
  CHECK(empty.n_nodes() == 3);
  CHECK(empty.n_edges() == 0);

  const std::vector<Edge> one{{0, 1}};
  const Graph g = build_graph(one, 2);
  CHECK(g.n_edges() == 1);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));

  const std::vector<Edge> messy{{0, 1}, {1, 0}, {0, 1}, {2, 2}};
  const Graph d = build_graph(messy, 3);
  CHECK(d.n_edges() == 1);
  CHECK(d.degree(2) == 0);
  CHECK(d.edges().front() == Edge{0, 1});
}

TEST_CASE("build_graph rejects out-of-range endpoints") {
  const std::vector<Edge> bad{{0, 3}};
  try {
    build_graph(bad, 3);
    FAIL("expected InvalidNode");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidNode);
  }
}

TEST_CASE("normalized_adjacency hand values") {
  CHECK(normalized_adjacency(build_graph({}, 1)).to_dense()(0, 0) == 1.0);

  const std::vector<Edge> one{{0, 1}};
  const Matrix two = normalized_adjacency(build_graph(one, 2)).to_dense();
  for (double v : two.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<Edge> star{{0, 1}, {0, 2}, {0, 3}};
  const Matrix s = normalized_adjacency(build_graph(star, 4)).to_dense();
  CHECK(s(0, 1) == doctest::Approx(1.0 / std::sqrt(8.0)));
  CHECK(s(0, 1) == doctest::Approx(0.35355).epsilon(1e-5));
  CHECK(s(0, 0) == doctest::Approx(0.25));
  CHECK(s(1, 1) == doctest::Approx(0.5));
  CHECK(s(1, 2) == 0.0);
}

TEST_CASE("powered_features hand values") {
  const std::vector<Edge> one{{0, 1}};
  const Graph g = build_graph(one, 2);
  const Matrix x = Matrix::identity(2);
  CHECK(powered_features(g, x, 0) == x);
  CHECK(powered_features(g, x, 1) == Matrix(2, 2, {0, 1, 1, 0}));
  CHECK(powered_features(g, x, 2) == Matrix(2, 2, {1, 0, 0, 1}));
  CHECK_THROWS_AS(powered_features(g, Matrix(3, 2), 1), Error);
}

TEST_CASE("homophily_ratio examples") {
  const std::vector<Edge> tri{{0, 1}, {1, 2}, {0, 2}};
  CHECK(homophily_ratio(build_graph(tri, 3), make_labels({1, 1, 1}, 2)) == 1.0);

  const std::vector<Edge> cycle{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  CHECK(homophily_ratio(build_graph(cycle, 4), make_labels({0, 1, 0, 1})) == 0.0);

  const std::vector<Edge> path{{0, 1}, {1, 2}, {2, 3}};
  CHECK(homophily_ratio(build_graph(path, 4), make_labels({0, 0, 0, 1})) == doctest::Approx(2.0 / 3.0));

  try {
    homophily_ratio(build_graph({}, 2), make_labels({0, 1}));
    FAIL("expected EmptyGraph");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyGraph);
  }
}

TEST_CASE("labels and splits are validated") {
  CHECK_THROWS_AS(make_labels({0, 0, 0}), Error);
  CHECK_THROWS_AS(make_labels({0, 3}, 2), Error);

  const LabelVector y = make_labels({0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  const DataSplit s = stratified_split(y, 0.2, 0.2, 1);
  CHECK_NOTHROW(validate_split(s, y));
  CHECK(mask_count(s.train) + mask_count(s.val) + mask_count(s.test) == 10);

  DataSplit overlap = s;
  for (std::size_t i = 0; i < 10; ++i)
    if (overlap.train[i]) overlap.test[i] = true;
  CHECK_THROWS_AS(validate_split(overlap, y), Error);

  DataSplit one_class = s;
  for (std::size_t i = 0; i < 10; ++i) one_class.train[i] = (i == 0);
  CHECK_THROWS_AS(validate_split(one_class, y), Error);
}

TEST_CASE("dense cap guards densifying operations") {
  const std::size_t saved = dense_cap();
  set_dense_cap(3);
  try {
    require_dense_capacity(4, "test");
    FAIL("expected CapacityExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CapacityExceeded);
  }
  set_dense_cap(saved);
}

TEST_CASE("property: CSR round-trips, A-hat symmetric and matches dense oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 25;
    const Graph g = random_graph(n, 0.25, rng);
    // Round trip through CSR rows back to an edge set.
    std::vector<Edge> back;
    for (NodeId u = 0; u < n; ++u) {
      const auto nb = g.neighbors(u);
      CHECK(std::is_sorted(nb.begin(), nb.end()));
      for (NodeId v : nb) {
        CHECK(v != u);
        CHECK(g.has_edge(v, u));
        if (u < v) back.emplace_back(u, v);
      }
    }
    CHECK(back == g.edges());

    const Matrix ahat = normalized_adjacency(g).to_dense();
    const Matrix ref = dense_normalized(dense_adjacency(g));
    CHECK(max_abs_diff(ahat, ref) < 1e-15);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(ahat(i, j) == ahat(j, i));
        if (i == j || g.has_edge(static_cast<NodeId>(i), static_cast<NodeId>(j))) {
          CHECK(ahat(i, j) > 0.0);
          CHECK(ahat(i, j) <= 1.0);
        } else {
          CHECK(ahat(i, j) == 0.0);
        }
        row += ahat(i, j);
      }
      CHECK(row <= 1.0 + static_cast<double>(n));
    }
  }
}

TEST_CASE("property: powered features compose and match dense powers") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 20;
    const Graph g = random_graph(n, 0.3, rng);
    const Matrix x = random_matrix(n, 1 + rng() % 5, rng);
    const int t1 = static_cast<int>(rng() % 3), t2 = static_cast<int>(rng() % 3);
    const Matrix whole = powered_features(g, x, t1 + t2);
    const Matrix split = powered_features(g, powered_features(g, x, t1), t2);
    CHECK(max_abs_diff(whole, split) < 1e-10);
    CHECK(max_abs_diff(whole, dense_power_apply(dense_adjacency(g), x, t1 + t2)) < 1e-10);
  }
}

TEST_CASE("property: homophily is invariant to class relabeling") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 20;
    const Graph g = random_graph(n, 0.4, rng);
    if (g.n_edges() == 0) continue;
    const int c = 2 + static_cast<int>(rng() % 4);
    const LabelVector y = random_labels(n, c, rng);
    std::vector<int> perm(static_cast<std::size_t>(c));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> relabeled(n);
    for (std::size_t i = 0; i < n; ++i) relabeled[i] = perm[static_cast<std::size_t>(y[i])];
    CHECK(homophily_ratio(g, y) == homophily_ratio(g, make_labels(relabeled, c)));
  }
}
