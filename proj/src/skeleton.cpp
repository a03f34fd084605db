#include "dualaug/skeleton.hpp"

#include "dualaug/errors.hpp"
#include "dualaug/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>

namespace dualaug {

using nlohmann::json;

std::vector<int> human16_parents() {
  return {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 8, 10, 11, 8, 13, 14};
}

std::vector<std::string> human16_names() {
  return {"Hip",   "RHip",      "RKnee",  "RAnkle", "LHip",      "LKnee",  "LAnkle", "Spine",
          "Thorax", "Head", "LShoulder", "LElbow", "LWrist", "RShoulder", "RElbow", "RWrist"};
}

int Skeleton::root() const {
  for (int j = 0; j < joint_count(); ++j) {
    if (parents[static_cast<std::size_t>(j)] < 0) return j;
  }
  return -1;
}

int Skeleton::bone_index_of_child(int joint) const {
  for (int b = 0; b < bone_count(); ++b) {
    if (bones[static_cast<std::size_t>(b)].child == joint) return b;
  }
  return -1;
}

namespace {

std::vector<std::pair<int, int>> mirror_pairs(const std::vector<std::string>& names, const std::vector<Bone>& bones) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < bones.size(); ++i) {
    const std::string& n = names[static_cast<std::size_t>(bones[i].child)];
    if (n.size() < 2 || n[0] != 'L') continue;
    const std::string mirrored = "R" + n.substr(1);
    for (std::size_t k = 0; k < bones.size(); ++k) {
      if (names[static_cast<std::size_t>(bones[k].child)] == mirrored) {
        out.emplace_back(static_cast<int>(i), static_cast<int>(k));
      }
    }
  }
  return out;
}

}  // namespace

Skeleton build_skeleton(const std::vector<int>& parents, std::vector<std::string> names,
                        std::optional<int> required_joints) {
  const int n = static_cast<int>(parents.size());
  if (required_joints && n != *required_joints) {
    throw ArityError("skeleton has " + std::to_string(n) + " joints, expected " + std::to_string(*required_joints));
  }
  if (n == 0) throw ArityError("skeleton has no joints");
  if (names.empty()) {
    for (int j = 0; j < n; ++j) names.push_back("joint" + std::to_string(j));
  }
  if (static_cast<int>(names.size()) != n) throw ArityError("names and parents differ in length");

  int root = -1;
  for (int j = 0; j < n; ++j) {
    const int p = parents[static_cast<std::size_t>(j)];
    if (p >= n || p < -1) throw ShapeError("parent index out of range at joint " + std::to_string(j));
    if (p == j) throw CycleError("joint " + std::to_string(j) + " is its own parent");
    if (p < 0) {
      if (root >= 0) throw CycleError("parents describe a forest (multiple roots)");
      root = j;
    }
  }
  if (root < 0) throw CycleError("parents contain a cycle (no root)");

  std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int p = parents[static_cast<std::size_t>(j)];
    if (p >= 0) children[static_cast<std::size_t>(p)].push_back(j);
  }

  Skeleton s;
  s.names = std::move(names);
  s.parents = parents;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::deque<int> queue{root};
  seen[static_cast<std::size_t>(root)] = 1;
  while (!queue.empty()) {
    const int j = queue.front();
    queue.pop_front();
    for (int c : children[static_cast<std::size_t>(j)]) {
      seen[static_cast<std::size_t>(c)] = 1;
      s.bones.push_back({j, c});
      queue.push_back(c);
    }
  }
  if (std::count(seen.begin(), seen.end(), 1) != n) throw CycleError("parents contain a cycle");

  s.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (const Bone& b : s.bones) {
    s.adjacency(b.parent, b.child) = 1.0;
    s.adjacency(b.child, b.parent) = 1.0;
  }
  s.degree = s.adjacency.rowwise().sum().asDiagonal();
  s.laplacian = normalized_laplacian(s);
  s.symmetric_bones = mirror_pairs(s.names, s.bones);
  return s;
}

const Skeleton& human16() {
  static const Skeleton skeleton = build_skeleton(human16_parents(), human16_names(), kHumanJoints);
  return skeleton;
}

Eigen::MatrixXd normalized_laplacian(const Skeleton& skeleton) {
  const Eigen::Index n = skeleton.adjacency.rows();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = skeleton.degree(i, i);
    inv_sqrt(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
  w -= inv_sqrt.asDiagonal() * skeleton.adjacency * inv_sqrt.asDiagonal();
  return w;
}

BoneVectors joints_to_bones(const Pose3D& pose, const Skeleton& skeleton) {
  if (pose.joints.rows() != skeleton.joint_count()) throw ShapeError("pose does not match skeleton");
  BoneVectors out;
  out.bones.resize(skeleton.bone_count(), 3);
  for (int i = 0; i < skeleton.bone_count(); ++i) {
    const Bone& b = skeleton.bones[static_cast<std::size_t>(i)];
    out.bones.row(i) = pose.joints.row(b.child) - pose.joints.row(b.parent);
  }
  out.root = pose.joints.row(skeleton.root()).transpose();
  return out;
}

Pose3D bones_to_joints(const BoneVectors& bones, const Skeleton& skeleton) {
  if (bones.bones.rows() != skeleton.bone_count()) throw ShapeError("bone count does not match skeleton");
  Pose3D out;
  out.joints.resize(skeleton.joint_count(), 3);
  out.joints.row(skeleton.root()) = bones.root.transpose();
  for (int i = 0; i < skeleton.bone_count(); ++i) {
    const Bone& b = skeleton.bones[static_cast<std::size_t>(i)];
    out.joints.row(b.child) = out.joints.row(b.parent) + bones.bones.row(i);
  }
  return out;
}

Eigen::MatrixXd bone_matrix(const Skeleton& skeleton) {
  const int j = skeleton.joint_count();
  const int nb = skeleton.bone_count();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * j, 3 * nb);
  for (int i = 0; i < nb; ++i) {
    const Bone& b = skeleton.bones[static_cast<std::size_t>(i)];
    for (int c = 0; c < 3; ++c) {
      m(3 * b.child + c, 3 * i + c) = 1.0;
      m(3 * b.parent + c, 3 * i + c) = -1.0;
    }
  }
  return m;
}

Eigen::MatrixXd fk_matrix(const Skeleton& skeleton) {
  const int j = skeleton.joint_count();
  const int nb = skeleton.bone_count();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * nb, 3 * j);
  // Column block of joint k accumulates every bone on the root->k path.
  for (int i = 0; i < nb; ++i) {
    const Bone& b = skeleton.bones[static_cast<std::size_t>(i)];
    m.middleCols(3 * b.child, 3) = m.middleCols(3 * b.parent, 3);
    for (int c = 0; c < 3; ++c) m(3 * i + c, 3 * b.child + c) = 1.0;
  }
  return m;
}

Eigen::MatrixXd laplacian_kron(const Skeleton& skeleton) {
  const int j = skeleton.joint_count();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * j, 3 * j);
  for (int r = 0; r < j; ++r) {
    for (int c = 0; c < j; ++c) {
      for (int k = 0; k < 3; ++k) m(3 * r + k, 3 * c + k) = skeleton.laplacian(r, c);
    }
  }
  return m;
}

Eigen::RowVectorXd flatten(const Pose3D& pose) {
  Eigen::RowVectorXd out(pose.joints.size());
  for (Eigen::Index j = 0; j < pose.joints.rows(); ++j) {
    for (int c = 0; c < 3; ++c) out(3 * j + c) = pose.joints(j, c);
  }
  return out;
}

Pose3D unflatten3(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() % 3 != 0) throw ShapeError("flattened pose length is not a multiple of 3");
  Pose3D out;
  out.joints.resize(row.size() / 3, 3);
  for (Eigen::Index j = 0; j < out.joints.rows(); ++j) {
    for (int c = 0; c < 3; ++c) out.joints(j, c) = row(3 * j + c);
  }
  return out;
}

Eigen::RowVectorXd flatten(const Pose2D& pose) {
  Eigen::RowVectorXd out(pose.keypoints.size());
  for (Eigen::Index j = 0; j < pose.keypoints.rows(); ++j) {
    for (int c = 0; c < 2; ++c) out(2 * j + c) = pose.keypoints(j, c);
  }
  return out;
}

Pose2D unflatten2(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() % 2 != 0) throw ShapeError("flattened keypoints length is odd");
  Pose2D out;
  out.keypoints.resize(row.size() / 2, 2);
  for (Eigen::Index j = 0; j < out.keypoints.rows(); ++j) {
    for (int c = 0; c < 2; ++c) out.keypoints(j, c) = row(2 * j + c);
  }
  return out;
}

Skeleton load_skeleton(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    std::vector<int> parents;
    for (const auto& p : doc.at("parents")) parents.push_back(p.is_null() ? -1 : p.get<int>());
    std::vector<std::string> names;
    if (doc.contains("names")) names = doc.at("names").get<std::vector<std::string>>();
    return build_skeleton(parents, std::move(names), kHumanJoints);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_skeleton(const Skeleton& skeleton, const std::string& path) {
  json doc;
  doc["names"] = skeleton.names;
  json parents = json::array();
  for (int p : skeleton.parents) parents.push_back(p < 0 ? json(nullptr) : json(p));
  doc["parents"] = parents;
  write_text_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace dualaug
