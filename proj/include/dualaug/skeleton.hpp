#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dualaug {

using Joints3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// Camera-frame joint positions in millimetres, one row per joint.
struct Pose3D {
  Joints3 joints;
};

// Image keypoints in pixels, one row per joint.
struct Pose2D {
  Points2 keypoints;
};

// Bone i is child - parent for Skeleton::bones[i].
struct BoneVectors {
  Joints3 bones;
  Eigen::Vector3d root = Eigen::Vector3d::Zero();
};

struct Bone {
  int parent = -1;
  int child = -1;
};

// Kinematic tree plus the graph matrices used by the Laplacian similarity.
// Immutable after construction.
struct Skeleton {
  std::vector<std::string> names;
  std::vector<int> parents;  // -1 for the root
  Eigen::MatrixXd adjacency;
  Eigen::MatrixXd degree;
  Eigen::MatrixXd laplacian;
  std::vector<Bone> bones;   // breadth-first from the root
  // Pairs of bone indices whose lengths are mirrored (left/right).
  std::vector<std::pair<int, int>> symmetric_bones;

  int joint_count() const { return static_cast<int>(parents.size()); }
  int bone_count() const { return static_cast<int>(bones.size()); }
  int root() const;
  int bone_index_of_child(int joint) const;
};

inline constexpr int kHumanJoints = 16;

// Parent list of the default 16-joint human model (Hip is the root).
std::vector<int> human16_parents();
std::vector<std::string> human16_names();

// Throws CycleError for cycles or forests, ArityError when required_joints
// is given and does not match.
Skeleton build_skeleton(const std::vector<int>& parents, std::vector<std::string> names = {},
                        std::optional<int> required_joints = std::nullopt);

const Skeleton& human16();

// I - D^-1/2 A D^-1/2
Eigen::MatrixXd normalized_laplacian(const Skeleton& skeleton);

BoneVectors joints_to_bones(const Pose3D& pose, const Skeleton& skeleton);
Pose3D bones_to_joints(const BoneVectors& bones, const Skeleton& skeleton);

// Linear maps on row-flattened poses (x0 y0 z0 x1 ...):
//   bones_flat  = joints_flat * bone_matrix         (3J x 3B)
//   joints_flat = bones_flat * fk_matrix + root     (3B x 3J)
//   laplacian_flat = joints_flat * laplacian_kron^T (3J x 3J, W kron I3)
Eigen::MatrixXd bone_matrix(const Skeleton& skeleton);
Eigen::MatrixXd fk_matrix(const Skeleton& skeleton);
Eigen::MatrixXd laplacian_kron(const Skeleton& skeleton);

// Row-major flattening helpers.
Eigen::RowVectorXd flatten(const Pose3D& pose);
Pose3D unflatten3(const Eigen::Ref<const Eigen::RowVectorXd>& row);
Eigen::RowVectorXd flatten(const Pose2D& pose);
Pose2D unflatten2(const Eigen::Ref<const Eigen::RowVectorXd>& row);

// Skeleton file: {"names": [...], "parents": [...]} with -1 or null for the root.
Skeleton load_skeleton(const std::string& path);
void save_skeleton(const Skeleton& skeleton, const std::string& path);

}  // namespace dualaug
