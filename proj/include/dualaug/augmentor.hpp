#pragma once

#include "dualaug/mlp.hpp"
#include "dualaug/skeleton.hpp"

#include <json.hpp>

#include <array>
#include <random>
#include <string>

namespace dualaug {

enum class AugmentorKind { weak, strong };

std::string to_string(AugmentorKind kind);
AugmentorKind augmentor_kind_from_string(const std::string& name);

struct AugmentorBounds {
  double max_angle_rad = 0.25;
  double max_log_scale = 0.15;
  double max_translation_mm = 300.0;
  double max_rotation_rad = 0.3;

  static AugmentorBounds weak_defaults();
  static AugmentorBounds strong_defaults();
};

// One generator head: its network and where its parameters live inside the
// augmentor's flat vector.
struct GeneratorHead {
  MlpSpec spec;
  int offset = 0;
  int size = 0;
};

// Bone-angle, bone-length and rotation/translation generators of one
// augmentor, sharing a single flat parameter vector (segments "ba.", "bl.", "rt.").
struct AugmentorParams {
  AugmentorKind kind = AugmentorKind::weak;
  int noise_dim = 16;
  AugmentorBounds bounds;
  bool tie_lengths = true;
  GeneratorHead ba;
  GeneratorHead bl;
  GeneratorHead rt;
  std::vector<int> length_groups;  // bone -> BL output index
  ParamStore params;
};

struct AugmentorOptions {
  int noise_dim = 16;
  std::vector<int> hidden_dims = {64, 64};
  bool tie_lengths = true;
};

// Final layers are zero-initialised, so a fresh augmentor is the identity.
AugmentorParams make_augmentor(AugmentorKind kind, const Skeleton& skeleton, std::mt19937_64& rng,
                               const AugmentorBounds& bounds, const AugmentorOptions& options = {});

enum class PoseState { OR = 0, BA = 1, BL = 2, RT = 3 };

struct PoseStates {
  Pose3D or_state;
  Pose3D ba_state;
  Pose3D bl_state;
  Pose3D rt_state;

  const Pose3D& operator[](PoseState s) const;
};

struct PairSets {
  std::array<std::pair<PoseState, PoseState>, 3> pp;
  std::array<std::pair<PoseState, PoseState>, 2> og;

  static PairSets standard();
};

// ---- single-pose operations ----

BoneVectors ba_apply(const BoneVectors& bones, const Vector& noise, const AugmentorParams& aug, const Skeleton& skeleton);
BoneVectors bl_apply(const BoneVectors& bones, const Vector& noise, const AugmentorParams& aug, const Skeleton& skeleton);
Pose3D rt_apply(const Pose3D& pose, const Vector& noise, const AugmentorParams& aug, const Skeleton& skeleton);
PoseStates augment(const Pose3D& pose, const Vector& noise, const AugmentorParams& aug, const Skeleton& skeleton);

// MSE of the joints plus MSE of the Laplacian-filtered joints.
double sim_loss(const Pose3D& a, const Pose3D& b, const Eigen::MatrixXd& laplacian);
double weak_gen_loss(const PoseStates& states, const PairSets& pairs, const Eigen::MatrixXd& laplacian, double alpha1);
double strong_gen_loss(const PoseStates& states, const PairSets& pairs, const Eigen::MatrixXd& laplacian, double alpha2);

// ---- batched, differentiable forms (rows are flattened poses) ----

struct StateVars {
  Var or_state;
  Var ba;
  Var bl;
  Var rt;

  Var operator[](PoseState s) const;
};

// Constant matrices derived from a skeleton, shared by the graph builders.
struct SkeletonOperators {
  Matrix bone_matrix;      // 3J x 3B
  Matrix fk_matrix;        // 3B x 3J
  Matrix laplacian_kron_t; // 3J x 3J
  int joints = 0;
  int bones = 0;
  int root = 0;

  static SkeletonOperators from(const Skeleton& skeleton);
};

Var ba_graph(Tape& tape, const AugmentorParams& aug, Var params, const SkeletonOperators& ops, Var bones, Var noise);
Var bl_graph(Tape& tape, const AugmentorParams& aug, Var params, const SkeletonOperators& ops, Var bones, Var noise);
Var rt_graph(Tape& tape, const AugmentorParams& aug, Var params, const SkeletonOperators& ops, Var joints, Var noise);
StateVars augment_graph(Tape& tape, const AugmentorParams& aug, Var params, const SkeletonOperators& ops, Var poses,
                        Var noise);

Var sim_loss_graph(Tape& tape, const SkeletonOperators& ops, Var a, Var b);
// mean over PP + og_weight * mean over OG; og_weight is +alpha1 (weak) or -alpha2 (strong).
Var gen_loss_graph(Tape& tape, const SkeletonOperators& ops, const StateVars& states, const PairSets& pairs,
                   double og_weight);

struct BatchStates {
  Matrix or_state;
  Matrix ba;
  Matrix bl;
  Matrix rt;
};

BatchStates augment_batch(const Matrix& poses, const Matrix& noise, const AugmentorParams& aug, const Skeleton& skeleton);

// Root-relative copy of row-flattened poses.
Matrix root_relative(const Matrix& poses, int root);
Var root_relative_graph(Tape& tape, Var poses, int joints, int root);

nlohmann::json to_json(const AugmentorParams& aug);
AugmentorParams augmentor_from_json(const nlohmann::json& doc);

}  // namespace dualaug
