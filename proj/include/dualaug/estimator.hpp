#pragma once

#include "dualaug/augmentor.hpp"
#include "dualaug/camera.hpp"
#include "dualaug/mlp.hpp"

#include <json.hpp>

#include <random>
#include <utility>

namespace dualaug {

// 2D-to-3D lifting network. Input is normalised keypoints (N x 2J), output
// root-relative millimetres (N x 3J) with the root row forced to zero.
struct EstimatorParams {
  MlpSpec spec;
  ParamStore params;
  double output_scale_mm = 1000.0;
  int root = 0;
};

struct EstimatorOptions {
  int width = 256;
  int residual_blocks = 2;
};

EstimatorParams make_estimator(int joints, int root, std::mt19937_64& rng, const EstimatorOptions& options = {});

Var estimate_graph(Tape& tape, const EstimatorParams& est, Var params, Var inputs);
Matrix predict(const EstimatorParams& est, const Matrix& inputs);
Pose3D estimate(const Pose2D& normalized_keypoints, const EstimatorParams& est);

double mse_loss(const Pose3D& pred, const Pose3D& target);

// Network inputs and supervision for one mini-batch.
struct LiftBatch {
  Matrix inputs;   // normalised keypoints, N x 2J
  Matrix targets;  // root-relative joints in mm, N x 3J

  Eigen::Index size() const { return inputs.rows(); }
};

// Projects camera-frame poses (N x 3J) and builds the matching lifting batch.
LiftBatch make_lift_batch(const Matrix& poses, const Camera& camera, int root);
LiftBatch slice_batch(const LiftBatch& batch, const std::vector<int>& rows);

inline constexpr double kMetresPerMm = 1e-3;

// L_MSE(P(x), y) on a batch in square metres, recorded on the tape.
Var batch_mse_graph(Tape& tape, const EstimatorParams& est, Var params, const LiftBatch& batch);
double batch_mse(const EstimatorParams& est, const LiftBatch& batch);

// Diagnostic pair of the min-max objective: (source-term MSE, augmented-term
// MSE) with the augmented poses produced by `aug` from the batch targets.
std::pair<double, double> dg_objective_eval(const LiftBatch& source, const AugmentorParams& aug,
                                            const EstimatorParams& est, const Camera& camera,
                                            const Skeleton& skeleton, std::mt19937_64& rng);

nlohmann::json to_json(const EstimatorParams& est);
EstimatorParams estimator_from_json(const nlohmann::json& doc);

}  // namespace dualaug
