#pragma once

#include "dualaug/augmentor.hpp"
#include "dualaug/camera.hpp"
#include "dualaug/estimator.hpp"
#include "dualaug/optimizer.hpp"

#include <functional>
#include <random>
#include <span>
#include <string>

namespace dualaug {

enum class MetaOrder { first, second };

std::string to_string(MetaOrder order);
MetaOrder meta_order_from_string(const std::string& name);

struct MetaConfig {
  double lr1 = 1e-4;
  double lr2 = 5e-4;
  double gamma = 1.0;
  int k = 1;
  MetaOrder order = MetaOrder::first;
};

void validate(const MetaConfig& cfg);

// Scalar loss of a flat parameter column on one batch.
using BatchLoss = std::function<Var(Tape&, Var params, const LiftBatch& batch)>;

struct MetaGradient {
  Vector gradient;  // d/dP [L(P, train) + gamma * mean_i L(P', test_i)]
  double train_loss = 0.0;
  double test_loss = 0.0;  // mean over test batches at P'
  double combined = 0.0;
};

MetaGradient meta_gradient(const Vector& params, const LiftBatch& train, std::span<const LiftBatch> tests,
                           const MetaConfig& cfg, const BatchLoss& loss);

// Applies the meta gradient through `outer` (plain SGD with lr2 reproduces
// P - lr2 * grad exactly).
MetaGradient meta_half_round(Vector& params, OptimizerState& outer, const LiftBatch& train,
                             std::span<const LiftBatch> tests, const MetaConfig& cfg, const BatchLoss& loss);

// One ordinary supervised step; returns the loss before the update.
double supervised_step(Vector& params, OptimizerState& opt, const LiftBatch& batch, const BatchLoss& loss);

BatchLoss estimator_loss(const EstimatorParams& est);

enum class MetaPlan {
  dual,         // source -> weak, then weak -> strong
  weak_only,    // source -> weak only
  strong_only,  // source -> strong only
};

struct MetaRoundOptions {
  MetaPlan plan = MetaPlan::dual;
  bool plain_supervised = false;  // replace each half-round by a supervised step on its train batch
};

struct MetaRoundReport {
  MetaGradient first;
  MetaGradient second;
  bool has_second = false;
};

// Draws fresh noise for k weak and k strong batches from the same source
// batch, projects them with `camera` and runs the half-rounds. Augmentors are
// read-only.
MetaRoundReport meta_round(EstimatorParams& est, OptimizerState& outer, const LiftBatch& source,
                           const Matrix& source_poses, const AugmentorParams& weak, const AugmentorParams& strong,
                           const Skeleton& skeleton, const Camera& camera, const MetaConfig& cfg, std::mt19937_64& rng,
                           const MetaRoundOptions& options = {});

Matrix draw_noise(Eigen::Index rows, int dim, std::mt19937_64& rng);

}  // namespace dualaug
