#include "dualaug/meta.hpp"

#include "dualaug/errors.hpp"

#include <array>

namespace dualaug {

std::string to_string(MetaOrder order) { return order == MetaOrder::first ? "first" : "second"; }

MetaOrder meta_order_from_string(const std::string& name) {
  if (name == "first") return MetaOrder::first;
  if (name == "second") return MetaOrder::second;
  throw ParseError("unknown meta order: " + name);
}

void validate(const MetaConfig& cfg) {
  if (!(cfg.lr1 >= 0.0) || !(cfg.lr2 > 0.0)) throw ShapeError("meta learning rates must be positive");
  if (!(cfg.gamma >= 0.0)) throw ShapeError("meta gamma must be non-negative");
  if (cfg.k < 1) throw ShapeError("meta k must be at least 1");
}

namespace {

void check_batches(const LiftBatch& train, std::span<const LiftBatch> tests) {
  if (train.size() == 0) throw EmptyBatchError("meta-train batch is empty");
  if (tests.empty()) throw EmptyBatchError("no meta-test batches");
  for (const LiftBatch& b : tests) {
    if (b.size() == 0) throw EmptyBatchError("meta-test batch is empty");
  }
}

Vector as_vector(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

}  // namespace

MetaGradient meta_gradient(const Vector& params, const LiftBatch& train, std::span<const LiftBatch> tests,
                           const MetaConfig& cfg, const BatchLoss& loss) {
  check_batches(train, tests);
  MetaGradient out;
  const double inv_k = 1.0 / static_cast<double>(tests.size());

  if (cfg.order == MetaOrder::first) {
    Tape tape;
    const Var p = tape.constant(params);
    const Var l_train = loss(tape, p, train);
    out.train_loss = tape.scalar(l_train);
    const Vector g_train = as_vector(tape.grad(l_train, p));

    const Vector inner = params - cfg.lr1 * g_train;
    Vector g_test = Vector::Zero(params.size());
    double test_sum = 0.0;
    for (const LiftBatch& b : tests) {
      Tape t;
      const Var q = t.constant(inner);
      const Var l = loss(t, q, b);
      test_sum += t.scalar(l);
      g_test += as_vector(t.grad(l, q));
    }
    out.test_loss = test_sum * inv_k;
    out.gradient = g_train + (cfg.gamma * inv_k) * g_test;
  } else {
    Tape tape;
    const Var p = tape.constant(params);
    const Var l_train = loss(tape, p, train);
    const std::array<Var, 1> wrt{p};
    const Var g = tape.grad_graph(l_train, wrt)[0];
    const Var inner = tape.sub(p, tape.scale(g, cfg.lr1));
    Var test_total = loss(tape, inner, tests[0]);
    for (std::size_t i = 1; i < tests.size(); ++i) test_total = tape.add(test_total, loss(tape, inner, tests[i]));
    const Var l_test = tape.scale(test_total, inv_k);
    const Var total = tape.add(l_train, tape.scale(l_test, cfg.gamma));
    out.train_loss = tape.scalar(l_train);
    out.test_loss = tape.scalar(l_test);
    out.gradient = as_vector(tape.grad(total, p));
  }
  out.combined = out.train_loss + cfg.gamma * out.test_loss;
  return out;
}

MetaGradient meta_half_round(Vector& params, OptimizerState& outer, const LiftBatch& train,
                             std::span<const LiftBatch> tests, const MetaConfig& cfg, const BatchLoss& loss) {
  validate(cfg);
  MetaGradient g = meta_gradient(params, train, tests, cfg, loss);
  optimizer_step(outer, params, g.gradient);
  return g;
}

double supervised_step(Vector& params, OptimizerState& opt, const LiftBatch& batch, const BatchLoss& loss) {
  if (batch.size() == 0) throw EmptyBatchError("supervised batch is empty");
  Tape tape;
  const Var p = tape.constant(params);
  const Var l = loss(tape, p, batch);
  const double value = tape.scalar(l);
  optimizer_step(opt, params, as_vector(tape.grad(l, p)));
  return value;
}

BatchLoss estimator_loss(const EstimatorParams& est) {
  return [&est](Tape& tape, Var params, const LiftBatch& batch) { return batch_mse_graph(tape, est, params, batch); };
}

Matrix draw_noise(Eigen::Index rows, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix out(rows, dim);
  // Row-major fill keeps the draw order independent of Eigen's storage.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int c = 0; c < dim; ++c) out(r, c) = normal(rng);
  }
  return out;
}

namespace {

std::vector<LiftBatch> augmented_batches(const Matrix& poses, const AugmentorParams& aug, const Skeleton& skeleton,
                                         const Camera& camera, int k, std::mt19937_64& rng) {
  std::vector<LiftBatch> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const Matrix noise = draw_noise(poses.rows(), aug.noise_dim, rng);
    const BatchStates states = augment_batch(poses, noise, aug, skeleton);
    out.push_back(make_lift_batch(states.rt, camera, skeleton.root()));
  }
  return out;
}

MetaGradient half(Vector& params, OptimizerState& outer, const LiftBatch& train, std::span<const LiftBatch> tests,
                  const MetaConfig& cfg, const BatchLoss& loss, bool plain) {
  if (!plain) return meta_half_round(params, outer, train, tests, cfg, loss);
  MetaGradient g;
  g.train_loss = supervised_step(params, outer, train, loss);
  g.combined = g.train_loss;
  return g;
}

}  // namespace

MetaRoundReport meta_round(EstimatorParams& est, OptimizerState& outer, const LiftBatch& source,
                           const Matrix& source_poses, const AugmentorParams& weak, const AugmentorParams& strong,
                           const Skeleton& skeleton, const Camera& camera, const MetaConfig& cfg, std::mt19937_64& rng,
                           const MetaRoundOptions& options) {
  validate(cfg);
  if (source.size() == 0) throw EmptyBatchError("meta round needs a non-empty source batch");
  const BatchLoss loss = estimator_loss(est);
  MetaRoundReport report;
  Vector& p = est.params.values;

  if (options.plan == MetaPlan::strong_only) {
    const auto strong_batches = augmented_batches(source_poses, strong, skeleton, camera, cfg.k, rng);
    report.first = half(p, outer, source, strong_batches, cfg, loss, options.plain_supervised);
    return report;
  }

  const auto weak_batches = augmented_batches(source_poses, weak, skeleton, camera, cfg.k, rng);
  report.first = half(p, outer, source, weak_batches, cfg, loss, options.plain_supervised);
  if (options.plan == MetaPlan::weak_only) return report;

  const auto strong_batches = augmented_batches(source_poses, strong, skeleton, camera, cfg.k, rng);
  report.second = half(p, outer, weak_batches.front(), strong_batches, cfg, loss, options.plain_supervised);
  report.has_second = true;
  return report;
}

}  // namespace dualaug
