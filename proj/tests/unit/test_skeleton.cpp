#include "helpers.hpp"

#include "dualaug/errors.hpp"
#include "dualaug/skeleton.hpp"

#include <filesystem>

using namespace dualaug;

TEST_CASE("human16 structure") {
  const Skeleton& s = human16();
  CHECK(s.joint_count() == 16);
  CHECK(s.bone_count() == 15);
  CHECK(s.root() == 0);
  CHECK(s.degree(0, 0) == 3.0);
  CHECK(s.adjacency(0, 1) == 1.0);
  CHECK(s.adjacency(0, 4) == 1.0);
  CHECK(s.adjacency(0, 7) == 1.0);
  CHECK(s.adjacency.row(0).sum() == 3.0);
  CHECK((s.adjacency - s.adjacency.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.adjacency.diagonal().cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 16; ++i) CHECK(s.degree(i, i) == s.adjacency.row(i).sum());
  CHECK(s.laplacian(0, 1) == doctest::Approx(-1.0 / std::sqrt(6.0)).epsilon(1e-12));
  CHECK(s.laplacian(0, 1) == doctest::Approx(-0.40825).epsilon(1e-4));
  // Parent before child in bone order.
  std::vector<bool> seen(16, false);
  seen[0] = true;
  for (const Bone& b : s.bones) {
    CHECK(seen[static_cast<std::size_t>(b.parent)]);
    seen[static_cast<std::size_t>(b.child)] = true;
  }
  CHECK(s.symmetric_bones.size() == 6);
}

TEST_CASE("small graphs") {
  const Skeleton chain = build_skeleton({-1, 0});
  CHECK(chain.adjacency(0, 1) == 1.0);
  CHECK(chain.adjacency(1, 0) == 1.0);
  CHECK(chain.degree(0, 0) == 1.0);
  CHECK(chain.degree(1, 1) == 1.0);
  CHECK(chain.laplacian(0, 0) == 1.0);
  CHECK(chain.laplacian(0, 1) == -1.0);
  CHECK(chain.laplacian(1, 0) == -1.0);
  CHECK(chain.laplacian(1, 1) == 1.0);

  const Skeleton path = build_skeleton({-1, 0, 1});
  CHECK(path.laplacian(0, 1) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(path.laplacian(0, 1) == doctest::Approx(-0.70711).epsilon(1e-5));
}

TEST_CASE("malformed parent lists") {
  CHECK_THROWS_AS(build_skeleton({1, 0}), CycleError);
  CHECK_THROWS_AS(build_skeleton({-1, 2, 1}), CycleError);
  CHECK_THROWS_AS(build_skeleton({-1, -1}), CycleError);
  CHECK_THROWS_AS(build_skeleton({0}), CycleError);
  CHECK_THROWS_AS(build_skeleton({-1, 0, 1}, {}, 16), ArityError);
}

TEST_CASE("laplacian properties hold for random trees") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 20);
    std::vector<int> parents(static_cast<std::size_t>(n), -1);
    for (int j = 1; j < n; ++j) parents[static_cast<std::size_t>(j)] = static_cast<int>(rng() % static_cast<unsigned>(j));
    const Skeleton s = build_skeleton(parents);
    CHECK((s.laplacian - s.laplacian.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < n; ++i) CHECK(s.laplacian(i, i) == 1.0);
    const Eigen::VectorXd root_degree = s.degree.diagonal().cwiseSqrt();
    CHECK((s.laplacian * root_degree).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("bones and joints") {
  const Skeleton chain = build_skeleton({-1, 0});
  Pose3D p;
  p.joints.resize(2, 3);
  p.joints << 0, 0, 0, 0, 0, 100;
  const BoneVectors b = joints_to_bones(p, chain);
  CHECK(b.bones(0, 2) == 100.0);
  CHECK(b.bones.row(0).head<2>().norm() == 0.0);

  Pose3D zero;
  zero.joints = Joints3::Zero(16, 3);
  CHECK(joints_to_bones(zero, human16()).bones.cwiseAbs().maxCoeff() == 0.0);
  BoneVectors zb;
  zb.bones = Joints3::Zero(15, 3);
  CHECK(bones_to_joints(zb, human16()).joints.cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose3D q = testing::random_pose(rng);
    const BoneVectors bv = joints_to_bones(q, human16());
    for (int k = 0; k < 15; ++k) {
      const Bone& e = human16().bones[static_cast<std::size_t>(k)];
      CHECK((bv.bones.row(k) - (q.joints.row(e.child) - q.joints.row(e.parent))).cwiseAbs().maxCoeff() == 0.0);
    }
    worst = std::max(worst, (bones_to_joints(bv, human16()).joints - q.joints).cwiseAbs().maxCoeff());
    const BoneVectors back = joints_to_bones(bones_to_joints(bv, human16()), human16());
    worst = std::max(worst, (back.bones - bv.bones).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("linear operators agree with the per-joint forms") {
  std::mt19937_64 rng(2);
  const Skeleton& s = human16();
  const Pose3D q = testing::random_pose(rng);
  const Eigen::RowVectorXd flat = flatten(q);
  const Eigen::RowVectorXd bones = flat * bone_matrix(s);
  const BoneVectors bv = joints_to_bones(q, s);
  for (int k = 0; k < 15; ++k) {
    for (int c = 0; c < 3; ++c) CHECK(bones(3 * k + c) == doctest::Approx(bv.bones(k, c)).epsilon(1e-12));
  }
  Eigen::RowVectorXd rebuilt = bones * fk_matrix(s);
  for (int j = 0; j < 16; ++j) rebuilt.segment<3>(3 * j) += q.joints.row(0);
  CHECK((rebuilt - flat).cwiseAbs().maxCoeff() < 1e-9);
  const Eigen::MatrixXd lq = s.laplacian * q.joints;
  const Eigen::RowVectorXd lflat = flat * laplacian_kron(s).transpose();
  for (int j = 0; j < 16; ++j) {
    for (int c = 0; c < 3; ++c) CHECK(lflat(3 * j + c) == doctest::Approx(lq(j, c)).epsilon(1e-12));
  }
}

TEST_CASE("skeleton file round trip") {
  const auto path = (std::filesystem::temp_directory_path() / "dualaug_skeleton_test.json").string();
  save_skeleton(human16(), path);
  const Skeleton s = load_skeleton(path);
  CHECK(s.parents == human16().parents);
  CHECK(s.names == human16().names);
  std::filesystem::remove(path);
}
