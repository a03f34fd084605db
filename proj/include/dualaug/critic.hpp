#pragma once

#include "dualaug/mlp.hpp"
#include "dualaug/skeleton.hpp"

#include <json.hpp>

#include <random>
#include <vector>

namespace dualaug {

enum class CriticRole { weak, strong };

// Wasserstein critic over flattened root-relative poses (N x 3J -> N x 1).
struct CriticParams {
  MlpSpec spec;
  ParamStore params;
  CriticRole role = CriticRole::weak;
};

CriticParams make_critic(CriticRole role, int joints, std::mt19937_64& rng, std::vector<int> hidden = {128, 128});

// One interpolation point for the gradient penalty.
struct GpSample {
  Pose3D endpoint_a;
  Pose3D endpoint_b;
  double epsilon = 0.0;
  Pose3D interpolant;  // epsilon * a + (1 - epsilon) * b
};

GpSample make_gp_sample(const Pose3D& a, const Pose3D& b, double epsilon);

Var critic_score_graph(Tape& tape, const CriticParams& critic, Var params, Var poses);
double critic_score(const Pose3D& pose, const CriticParams& critic);

// Per-row penalty (1 - |grad D(x)|)^2, or 1 - |grad D(x)| when `squared` is false,
// at x = eps*a + (1-eps)*b. Returns an N x 1 node, differentiable w.r.t. params.
Var gradient_penalty_graph(Tape& tape, const CriticParams& critic, Var params, const Matrix& a, const Matrix& b,
                           const Vector& epsilon, bool squared = true);
double gradient_penalty(const CriticParams& critic, const Pose3D& a, const Pose3D& b, double epsilon,
                        bool squared = true);

struct CriticLossTerms {
  double synth_mean = 0.0;
  double real_mean = 0.0;
  double penalty_mean = 0.0;
  double total = 0.0;
};

// E[D(synth)] - E[D(real)] + beta * E[penalty(real, synth, eps)], eps ~ U[0,1]
// drawn per row from `rng`. Minimised by the critic.
Var critic_loss_graph(Tape& tape, const CriticParams& critic, Var params, const Matrix& real, const Matrix& synth,
                      double beta, std::mt19937_64& rng, bool squared = true, CriticLossTerms* terms = nullptr);

// Source vs weak-augmented poses (weak critic).
double weak_critic_loss(const std::vector<Pose3D>& batch_or, const std::vector<Pose3D>& batch_wa,
                        const CriticParams& critic, double beta1, std::mt19937_64& rng);
// Weak-augmented vs strong-augmented poses (strong critic).
double strong_critic_loss(const std::vector<Pose3D>& batch_wa, const std::vector<Pose3D>& batch_sa,
                          const CriticParams& critic, double beta2, std::mt19937_64& rng);

// -E[D(synth)]; gradients flow into `synth` only (critic params are constants).
Var generator_adv_graph(Tape& tape, const CriticParams& critic, Var synth);
double generator_adv_loss(const std::vector<Pose3D>& batch_synth, const CriticParams& critic);

Matrix stack_poses(const std::vector<Pose3D>& poses);

nlohmann::json to_json(const CriticParams& critic);
CriticParams critic_from_json(const nlohmann::json& doc);

}  // namespace dualaug
