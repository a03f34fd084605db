#include "dualaug/critic.hpp"

#include "dualaug/checkpoint.hpp"
#include "dualaug/diffcore.hpp"
#include "dualaug/errors.hpp"

namespace dualaug {

using nlohmann::json;

CriticParams make_critic(CriticRole role, int joints, std::mt19937_64& rng, std::vector<int> hidden) {
  CriticParams c;
  c.role = role;
  c.spec = {3 * joints, std::move(hidden), 1, 0.01, false, 0};
  c.params = init_mlp(c.spec, rng);
  return c;
}

GpSample make_gp_sample(const Pose3D& a, const Pose3D& b, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ShapeError("epsilon must lie in [0, 1]");
  GpSample s{a, b, epsilon, {}};
  s.interpolant.joints = epsilon * a.joints + (1.0 - epsilon) * b.joints;
  return s;
}

Var critic_score_graph(Tape& tape, const CriticParams& critic, Var params, Var poses) {
  return mlp_forward(critic.spec, tape, params, poses);
}

double critic_score(const Pose3D& pose, const CriticParams& critic) {
  return mlp_eval(critic.spec, critic.params.values, Matrix(flatten(pose)))(0, 0);
}

Var gradient_penalty_graph(Tape& tape, const CriticParams& critic, Var params, const Matrix& a, const Matrix& b,
                           const Vector& epsilon, bool squared) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || epsilon.size() != a.rows()) {
    throw ShapeError("gradient penalty: endpoint batches and epsilon disagree");
  }
  Matrix interp(a.rows(), a.cols());
  for (Eigen::Index n = 0; n < a.rows(); ++n) {
    const double e = epsilon(n);
    interp.row(n) = e * a.row(n) + (1.0 - e) * b.row(n);
  }
  const Var x = tape.constant(std::move(interp));
  const Var total = tape.sum(critic_score_graph(tape, critic, params, x));
  const Var norms = row_grad_norms(tape, total, x);
  const Var gap = tape.add_scalar(tape.scale(norms, -1.0), 1.0);
  return squared ? tape.square(gap) : gap;
}

double gradient_penalty(const CriticParams& critic, const Pose3D& a, const Pose3D& b, double epsilon, bool squared) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ShapeError("epsilon must lie in [0, 1]");
  Tape tape;
  const Var p = tape.constant(critic.params.values);
  const Vector eps = Vector::Constant(1, epsilon);
  return tape.scalar(gradient_penalty_graph(tape, critic, p, Matrix(flatten(a)), Matrix(flatten(b)), eps, squared));
}

Var critic_loss_graph(Tape& tape, const CriticParams& critic, Var params, const Matrix& real, const Matrix& synth,
                      double beta, std::mt19937_64& rng, bool squared, CriticLossTerms* terms) {
  if (real.rows() == 0 || synth.rows() == 0) throw EmptyBatchError("critic loss needs non-empty batches");
  if (real.rows() != synth.rows()) throw ShapeError("critic loss: real and synthetic batches differ in size");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector eps(real.rows());
  for (Eigen::Index n = 0; n < eps.size(); ++n) eps(n) = unit(rng);

  const Var d_synth = tape.mean(critic_score_graph(tape, critic, params, tape.constant(synth)));
  const Var d_real = tape.mean(critic_score_graph(tape, critic, params, tape.constant(real)));
  const Var gp = tape.mean(gradient_penalty_graph(tape, critic, params, real, synth, eps, squared));
  const Var loss = tape.add(tape.sub(d_synth, d_real), tape.scale(gp, beta));
  if (terms) {
    terms->synth_mean = tape.scalar(d_synth);
    terms->real_mean = tape.scalar(d_real);
    terms->penalty_mean = tape.scalar(gp);
    terms->total = tape.scalar(loss);
  }
  return loss;
}

Matrix stack_poses(const std::vector<Pose3D>& poses) {
  if (poses.empty()) return Matrix(0, 0);
  Matrix out(static_cast<Eigen::Index>(poses.size()), poses.front().joints.size());
  for (std::size_t i = 0; i < poses.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = flatten(poses[i]);
  return out;
}

namespace {

double critic_loss_value(const std::vector<Pose3D>& real, const std::vector<Pose3D>& synth, const CriticParams& critic,
                         double beta, std::mt19937_64& rng) {
  if (real.empty() || synth.empty()) throw EmptyBatchError("critic loss needs non-empty batches");
  Tape tape;
  const Var p = tape.constant(critic.params.values);
  return tape.scalar(critic_loss_graph(tape, critic, p, stack_poses(real), stack_poses(synth), beta, rng));
}

}  // namespace

double weak_critic_loss(const std::vector<Pose3D>& batch_or, const std::vector<Pose3D>& batch_wa,
                        const CriticParams& critic, double beta1, std::mt19937_64& rng) {
  return critic_loss_value(batch_or, batch_wa, critic, beta1, rng);
}

double strong_critic_loss(const std::vector<Pose3D>& batch_wa, const std::vector<Pose3D>& batch_sa,
                          const CriticParams& critic, double beta2, std::mt19937_64& rng) {
  return critic_loss_value(batch_wa, batch_sa, critic, beta2, rng);
}

Var generator_adv_graph(Tape& tape, const CriticParams& critic, Var synth) {
  if (tape.value(synth).rows() == 0) throw EmptyBatchError("generator loss needs a non-empty batch");
  const Var p = tape.constant(critic.params.values);
  return tape.scale(tape.mean(critic_score_graph(tape, critic, p, synth)), -1.0);
}

double generator_adv_loss(const std::vector<Pose3D>& batch_synth, const CriticParams& critic) {
  if (batch_synth.empty()) throw EmptyBatchError("generator loss needs a non-empty batch");
  Tape tape;
  return tape.scalar(generator_adv_graph(tape, critic, tape.constant(stack_poses(batch_synth))));
}

json to_json(const CriticParams& critic) {
  return {{"format", "dualaug-critic/1"},
          {"role", critic.role == CriticRole::weak ? "weak" : "strong"},
          {"spec", to_json(critic.spec)},
          {"params", to_json(critic.params)}};
}

CriticParams critic_from_json(const json& doc) {
  try {
    CriticParams c;
    const std::string role = doc.at("role").get<std::string>();
    if (role != "weak" && role != "strong") throw ParseError("unknown critic role: " + role);
    c.role = role == "weak" ? CriticRole::weak : CriticRole::strong;
    c.spec = mlp_spec_from_json(doc.at("spec"));
    c.params = param_store_from_json(doc.at("params"));
    if (c.params.size() != mlp_layout(c.spec).total()) throw ParseError("critic parameter count mismatch");
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("critic: ") + e.what());
  }
}

}  // namespace dualaug
