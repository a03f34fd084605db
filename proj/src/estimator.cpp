#include "dualaug/estimator.hpp"

#include "dualaug/checkpoint.hpp"
#include "dualaug/diffcore.hpp"
#include "dualaug/errors.hpp"

namespace dualaug {

using nlohmann::json;

EstimatorParams make_estimator(int joints, int root, std::mt19937_64& rng, const EstimatorOptions& options) {
  EstimatorParams est;
  est.spec = {2 * joints, {options.width}, 3 * joints, 0.01, true, options.residual_blocks};
  est.params = init_mlp(est.spec, rng);
  est.root = root;
  return est;
}

Var estimate_graph(Tape& tape, const EstimatorParams& est, Var params, Var inputs) {
  const Var raw = tape.scale(mlp_forward(est.spec, tape, params, inputs), est.output_scale_mm);
  const int cols = est.spec.output_dim;
  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(cols));
  for (int c = 0; c < cols; ++c) {
    if (c / 3 != est.root) keep.push_back(c);
  }
  return tape.scatter_cols(tape.gather_cols(raw, keep), keep, cols);
}

Matrix predict(const EstimatorParams& est, const Matrix& inputs) {
  Tape tape;
  return tape.value(estimate_graph(tape, est, tape.constant(est.params.values), tape.constant(inputs)));
}

Pose3D estimate(const Pose2D& normalized_keypoints, const EstimatorParams& est) {
  if (!normalized_keypoints.keypoints.allFinite()) throw ShapeError("keypoints must be finite");
  return unflatten3(predict(est, Matrix(flatten(normalized_keypoints))).row(0));
}

double mse_loss(const Pose3D& pred, const Pose3D& target) {
  if (pred.joints.rows() != target.joints.rows()) throw ShapeError("mse_loss: joint counts differ");
  return (pred.joints - target.joints).squaredNorm() / static_cast<double>(pred.joints.size());
}

LiftBatch make_lift_batch(const Matrix& poses, const Camera& camera, int root) {
  return {normalize_keypoints(project_flat(poses, camera), camera), root_relative(poses, root)};
}

LiftBatch slice_batch(const LiftBatch& batch, const std::vector<int>& rows) {
  LiftBatch out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), batch.inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()), batch.targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = batch.inputs.row(rows[i]);
    out.targets.row(static_cast<Eigen::Index>(i)) = batch.targets.row(rows[i]);
  }
  return out;
}

Var batch_mse_graph(Tape& tape, const EstimatorParams& est, Var params, const LiftBatch& batch) {
  if (batch.size() == 0) throw EmptyBatchError("empty lifting batch");
  const Var pred = estimate_graph(tape, est, params, tape.constant(batch.inputs));
  // Metres keep the gradient scale independent of the millimetre output units.
  return mse(tape, tape.scale(pred, kMetresPerMm), tape.constant(batch.targets * kMetresPerMm));
}

double batch_mse(const EstimatorParams& est, const LiftBatch& batch) {
  Tape tape;
  return tape.scalar(batch_mse_graph(tape, est, tape.constant(est.params.values), batch));
}

std::pair<double, double> dg_objective_eval(const LiftBatch& source, const AugmentorParams& aug,
                                            const EstimatorParams& est, const Camera& camera,
                                            const Skeleton& skeleton, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix noise(source.size(), aug.noise_dim);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
  const BatchStates states = augment_batch(source.targets, noise, aug, skeleton);
  const LiftBatch augmented = make_lift_batch(states.rt, camera, skeleton.root());
  return {batch_mse(est, source), batch_mse(est, augmented)};
}

json to_json(const EstimatorParams& est) {
  return {{"format", "dualaug-estimator/1"},
          {"spec", to_json(est.spec)},
          {"output_scale_mm", est.output_scale_mm},
          {"root", est.root},
          {"params", to_json(est.params)}};
}

EstimatorParams estimator_from_json(const json& doc) {
  try {
    EstimatorParams est;
    est.spec = mlp_spec_from_json(doc.at("spec"));
    est.output_scale_mm = doc.value("output_scale_mm", 1000.0);
    est.root = doc.value("root", 0);
    est.params = param_store_from_json(doc.at("params"));
    if (est.params.size() != mlp_layout(est.spec).total()) throw ParseError("estimator parameter count mismatch");
    return est;
  } catch (const json::exception& e) {
    throw ParseError(std::string("estimator: ") + e.what());
  }
}

}  // namespace dualaug
