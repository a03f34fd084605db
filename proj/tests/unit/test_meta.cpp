#include "helpers.hpp"

#include "dualaug/errors.hpp"
#include "dualaug/meta.hpp"
#include "dualaug/optimizer.hpp"

#include <array>

using namespace dualaug;
using testing::random_matrix;

namespace {

// Scalar model: L(p) = mean((p*a - b)^2) over the first columns of a batch.
Var scalar_loss(Tape& t, Var p, const LiftBatch& batch) {
  const Var a = t.constant(batch.inputs.col(0));
  const Var b = t.constant(batch.targets.col(0));
  return t.mean(t.square(t.sub(t.matmul(a, p), b)));
}

LiftBatch scalar_batch(std::mt19937_64& rng, int n) {
  return {random_matrix(n, 1, rng), random_matrix(n, 1, rng)};
}

double grad_of(const LiftBatch& b, double p) {
  return 2.0 * (b.inputs.col(0).array() * (p * b.inputs.col(0).array() - b.targets.col(0).array())).mean();
}

double hess_of(const LiftBatch& b) { return 2.0 * b.inputs.col(0).array().square().mean(); }

}  // namespace

TEST_CASE("meta half-round matches the scalar hand derivation") {
  std::mt19937_64 rng(41);
  for (MetaOrder order : {MetaOrder::first, MetaOrder::second}) {
    for (int trial = 0; trial < 25; ++trial) {
      const int k = 1 + trial % 3;
      const LiftBatch train = scalar_batch(rng, 8);
      std::vector<LiftBatch> tests;
      for (int i = 0; i < k; ++i) tests.push_back(scalar_batch(rng, 8));
      MetaConfig cfg;
      cfg.lr1 = 0.05 * (1 + trial % 4);
      cfg.lr2 = 0.1;
      cfg.gamma = 0.5 * (trial % 3);
      cfg.order = order;
      const double p0 = random_matrix(1, 1, rng)(0, 0);

      const double g_train = grad_of(train, p0);
      const double inner = p0 - cfg.lr1 * g_train;
      const double chain = order == MetaOrder::second ? 1.0 - cfg.lr1 * hess_of(train) : 1.0;
      double g_test = 0.0;
      for (const LiftBatch& b : tests) g_test += grad_of(b, inner) * chain;
      const double expected = p0 - cfg.lr2 * (g_train + cfg.gamma * g_test / k);

      Vector p = Vector::Constant(1, p0);
      OptimizerState sgd = make_optimizer(OptimizerKind::sgd, cfg.lr2, 1);
      meta_half_round(p, sgd, train, tests, cfg, scalar_loss);
      CHECK(std::abs(p(0) - expected) < 1e-12);
    }
  }
}

TEST_CASE("meta limits") {
  std::mt19937_64 rng(42);
  const LiftBatch train = scalar_batch(rng, 6);
  const std::array<LiftBatch, 2> tests{scalar_batch(rng, 6), scalar_batch(rng, 6)};
  const Vector p0 = Vector::Constant(1, 0.7);
  MetaConfig cfg;
  cfg.lr2 = 0.2;

  SUBCASE("gamma zero is a plain supervised step") {
    cfg.gamma = 0.0;
    for (MetaOrder order : {MetaOrder::first, MetaOrder::second}) {
      cfg.order = order;
      Vector a = p0, b = p0;
      OptimizerState oa = make_optimizer(OptimizerKind::adamw, cfg.lr2, 1);
      OptimizerState ob = oa;
      meta_half_round(a, oa, train, tests, cfg, scalar_loss);
      supervised_step(b, ob, train, scalar_loss);
      CHECK(a == b);
    }
  }
  SUBCASE("lr1 zero evaluates every loss at the same point") {
    cfg.lr1 = 0.0;
    cfg.gamma = 1.0;
    const MetaGradient g = meta_gradient(p0, train, tests, cfg, scalar_loss);
    const double expected = grad_of(train, 0.7) + 0.5 * (grad_of(tests[0], 0.7) + grad_of(tests[1], 0.7));
    CHECK(std::abs(g.gradient(0) - expected) < 1e-14);
  }
  SUBCASE("test loss is the mean over batches") {
    cfg.gamma = 2.0;
    const MetaGradient g = meta_gradient(p0, train, tests, cfg, scalar_loss);
    CHECK(g.combined == doctest::Approx(g.train_loss + 2.0 * g.test_loss).epsilon(1e-15));
  }
  SUBCASE("errors") {
    Vector p = p0;
    OptimizerState o = make_optimizer(OptimizerKind::sgd, 0.1, 1);
    CHECK_THROWS_AS(meta_half_round(p, o, train, std::span<const LiftBatch>{}, cfg, scalar_loss), EmptyBatchError);
    const std::array<LiftBatch, 1> empty{LiftBatch{}};
    CHECK_THROWS_AS(meta_half_round(p, o, train, empty, cfg, scalar_loss), EmptyBatchError);
    cfg.k = 0;
    CHECK_THROWS_AS(validate(cfg), ShapeError);
  }
}

TEST_CASE("first-order meta gradient of the estimator matches finite differences") {
  std::mt19937_64 rng(43);
  const EstimatorParams est = make_estimator(4, 0, rng, {12, 1});
  EstimatorParams live = est;
  live.params.values = random_matrix(est.params.size(), 1, rng, 0.2);
  const LiftBatch train{random_matrix(5, 8, rng, 0.2), random_matrix(5, 12, rng, 200.0)};
  const std::array<LiftBatch, 1> tests{LiftBatch{random_matrix(5, 8, rng, 0.2), random_matrix(5, 12, rng, 200.0)}};
  MetaConfig cfg;
  cfg.lr1 = 0.01;
  const BatchLoss loss = estimator_loss(live);
  const auto value = [&](const Vector& p) { return meta_gradient(p, train, tests, cfg, loss).combined; };

  // Second order is the exact derivative of the combined objective.
  cfg.order = MetaOrder::second;
  const Vector g2 = meta_gradient(live.params.values, train, tests, cfg, loss).gradient;
  CHECK(testing::fd_directional_error(value, live.params.values, g2, rng) < 1e-4);

  // First order drops only the lr1 * Hessian term.
  cfg.order = MetaOrder::first;
  const Vector g1 = meta_gradient(live.params.values, train, tests, cfg, loss).gradient;
  CHECK((g1 - g2).norm() <= 0.05 * g2.norm());
}
