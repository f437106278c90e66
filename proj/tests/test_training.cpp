#include <doctest.h>

#include <cmath>

#include "nsp/error.hpp"
#include "nsp/synthetic.hpp"
#include "nsp/training.hpp"
#include "support.hpp"

using namespace nsp;
using namespace nsp::testing;

TEST_CASE("nll_loss hand values") {
  const LabelVector y = make_labels({0, 1}, 2);
  const Mask all{true, true};
  CHECK(nll_loss(Matrix(2, 2, {1 - 1e-15, 1e-15, 1e-15, 1 - 1e-15}), y, all) < 1e-14);
  const LabelVector y5 = make_labels({0, 1, 2, 3, 4}, 5);
  CHECK(nll_loss(Matrix(5, 5, 0.2), y5, Mask(5, true)) == doctest::Approx(1.60944).epsilon(1e-5));
  CHECK(nll_loss(Matrix(2, 2, {0.5, 0.5, 0.75, 0.25}), y, all) ==
        doctest::Approx(1.03972).epsilon(1e-5));
  try {
    nll_loss(Matrix(2, 2, 0.5), y, Mask(2, false));
    FAIL("expected EmptyMask");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMask);
  }
}

TEST_CASE("accuracy hand values and tie rule") {
  const LabelVector y = make_labels({0, 1, 2, 1}, 3);
  const Matrix s(4, 3, {0.8, 0.1, 0.1, 0.1, 0.7, 0.2, 0.1, 0.1, 0.8, 0.6, 0.3, 0.1});
  CHECK(accuracy(s, y, Mask(4, true)) == 0.75);
  CHECK(accuracy(Matrix(4, 3, 1.0 / 3.0), y, Mask(4, true)) == 0.25);
  CHECK(accuracy(Matrix(4, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0}), y, Mask(4, true)) == 1.0);
}

TEST_CASE("adam_step textbook values") {
  const double lr = 0.01;
  SUBCASE("zero gradient leaves parameters unchanged") {
    AdamState st(2);
    std::vector<double> p{1.5, -2.0};
    adam_step(st, p, std::vector<double>{0.0, 0.0}, lr);
    CHECK(p == std::vector<double>{1.5, -2.0});
  }
  SUBCASE("first step is about -lr * sign(g)") {
    AdamState st(1);
    std::vector<double> p{0.0};
    const double g = 0.3;
    adam_step(st, p, std::vector<double>{g}, lr);
    // m_hat = g, v_hat = g^2 after bias correction.
    CHECK(p[0] == doctest::Approx(-lr * g / (std::abs(g) + 1e-8)).epsilon(1e-14));
    CHECK(std::abs(p[0] + lr) < 1e-9);
  }
  SUBCASE("second identical step is no larger than the first") {
    AdamState st(1);
    std::vector<double> p{0.0};
    adam_step(st, p, std::vector<double>{-2.0}, lr);
    const double first = std::abs(p[0]);
    const double before = p[0];
    adam_step(st, p, std::vector<double>{-2.0}, lr);
    CHECK(std::abs(p[0] - before) <= first + 1e-12);
  }
  SUBCASE("non-finite gradient") {
    AdamState st(1);
    std::vector<double> p{0.0};
    try {
      adam_step(st, p, std::vector<double>{std::nan("")}, lr);
      FAIL("expected NonFiniteGradient");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteGradient);
    }
  }
}

TEST_CASE("train: invalid configs are rejected") {
  TrainConfig cfg;
  cfg.lr = -1.0;
  CHECK_THROWS_AS(validate_config(cfg), Error);
  cfg = {};
  cfg.epochs = 0;
  CHECK_THROWS_AS(validate_config(cfg), Error);
}

TEST_CASE("train: lr = 0 keeps the initial parameters") {
  const Dataset d = random_dataset(20, 4, 2, 0.3, 1);
  TrainConfig cfg;
  cfg.variant = Variant::Gcn;
  cfg.lr = 0.0;
  cfg.epochs = 5;
  cfg.hidden = {4};
  const TrainResult r = train(d, nullptr, cfg);
  const std::size_t dims[] = {4, 4, 2};
  CHECK(r.final_params == init_params(Variant::Gcn, dims, cfg.seed));
}

TEST_CASE("train: identical seeds give identical loss curves") {
  const Dataset d = random_dataset(30, 5, 3, 0.2, 2);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.k_pos = 3;
  cfg.k_neg = 3;
  cfg.hidden = {8};
  const DualKnnGraphs dual = build_dual_knn(d.graph, d.features, 3, 3);
  const TrainResult a = train(d, &dual, cfg);
  const TrainResult b = train(d, &dual, cfg);
  CHECK(a.train_loss == b.train_loss);
  CHECK(a.val_accuracy == b.val_accuracy);
  CHECK(a.best_params == b.best_params);
}

TEST_CASE("train: reported test accuracy is that of the best-validation parameters") {
  const Dataset d = random_dataset(40, 5, 3, 0.2, 3);
  const DualKnnGraphs dual = build_dual_knn(d.graph, d.features, 4, 4);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.hidden = {8};
  const TrainResult r = train(d, &dual, cfg);
  CHECK(r.best_val_accuracy == r.val_accuracy[r.best_epoch]);
  for (std::size_t e = 0; e < r.val_accuracy.size(); ++e) {
    CHECK(r.val_accuracy[e] <= r.best_val_accuracy);
    if (r.val_accuracy[e] == r.best_val_accuracy) CHECK(r.val_loss[e] >= r.val_loss[r.best_epoch]);
  }
  const Matrix s = forward(r.best_params, d, &dual);
  CHECK(accuracy(s, d.labels, d.split.test) == r.test_accuracy);
}

TEST_CASE("train: single-class-signal dataset is fit quickly") {
  // Every node's feature carries its own label: trivially separable.
  Dataset d = random_dataset(30, 2, 2, 0.2, 4);
  for (std::size_t i = 0; i < 30; ++i) {
    d.features(i, 0) = d.labels[i] == 0 ? 3.0 : -3.0;
    d.features(i, 1) = 1.0;
  }
  TrainConfig cfg;
  cfg.variant = Variant::Sgc;
  cfg.sgc_tau = 0;
  cfg.epochs = 50;
  cfg.lr = 0.1;
  const TrainResult r = train(d, nullptr, cfg);
  CHECK(r.train_loss.back() < 0.1);
  CHECK(r.test_accuracy == 1.0);
}

TEST_CASE("train: linearly separable 2-class cSBM reaches 0.95 for every variant") {
  SyntheticSpec spec;
  spec.n_nodes = 100;
  spec.n_classes = 2;
  spec.mean_degree = 6;
  spec.homophily = 0.9;
  spec.feature_dim = 8;
  spec.class_separation = 6.0;
  spec.feature_noise = 1.0;
  spec.seed = 5;
  spec.train_fraction = 0.3;
  spec.val_fraction = 0.2;
  const Dataset d = generate_synthetic(spec);
  const DualKnnGraphs dual = build_dual_knn(d.graph, d.features, 5, 5);
  for (Variant v : {Variant::Gcn, Variant::Sgc, Variant::Nspgnn, Variant::NspgnnWo}) {
    TrainConfig cfg;
    cfg.variant = v;
    cfg.hidden = {16};
    const TrainResult r = train(d, &dual, cfg);
    CHECK_MESSAGE(r.test_accuracy >= 0.95, to_string(v));
  }
}
