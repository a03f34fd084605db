#include "helpers.hpp"

#include "dualaug/augmentor.hpp"
#include "dualaug/errors.hpp"
#include "dualaug/metrics.hpp"

using namespace dualaug;
using testing::random_matrix;

namespace {

AugmentorParams perturbed(AugmentorKind kind, std::mt19937_64& rng, double scale = 0.3) {
  AugmentorParams aug = make_augmentor(kind, human16(), rng,
                                       kind == AugmentorKind::weak ? AugmentorBounds::weak_defaults()
                                                                   : AugmentorBounds::strong_defaults());
  aug.params.values = random_matrix(aug.params.size(), 1, rng, scale);
  return aug;
}

Vector noise(std::mt19937_64& rng, int dim = 16) { return testing::as_vector(random_matrix(dim, 1, rng)); }

double max_distance_change(const Pose3D& a, const Pose3D& b) {
  double worst = 0.0;
  for (int i = 0; i < static_cast<int>(a.joints.rows()); ++i) {
    for (int j = i + 1; j < static_cast<int>(a.joints.rows()); ++j) {
      const double da = (a.joints.row(i) - a.joints.row(j)).norm();
      const double db = (b.joints.row(i) - b.joints.row(j)).norm();
      worst = std::max(worst, std::abs(da - db));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("fresh augmentors are the identity") {
  std::mt19937_64 rng(21);
  for (AugmentorKind kind : {AugmentorKind::weak, AugmentorKind::strong}) {
    const AugmentorParams aug = make_augmentor(kind, human16(), rng, AugmentorBounds::strong_defaults());
    for (int i = 0; i < 20; ++i) {
      const Pose3D p = testing::random_pose(rng);
      const PoseStates s = augment(p, noise(rng), aug, human16());
      CHECK(s.ba_state.joints == p.joints);
      CHECK(s.bl_state.joints == p.joints);
      CHECK(s.rt_state.joints == p.joints);
    }
  }
}

TEST_CASE("stage invariants under random parameters") {
  std::mt19937_64 rng(22);
  const Skeleton& sk = human16();
  for (int trial = 0; trial < 30; ++trial) {
    const AugmentorParams aug = perturbed(AugmentorKind::strong, rng);
    const Pose3D p = testing::random_pose(rng);
    const Vector z = noise(rng);
    const BoneVectors b = joints_to_bones(p, sk);

    const BoneVectors ba = ba_apply(b, z, aug, sk);
    for (int k = 0; k < sk.bone_count(); ++k) {
      CHECK(ba.bones.row(k).norm() == doctest::Approx(b.bones.row(k).norm()).epsilon(1e-10));
    }

    const BoneVectors bl = bl_apply(b, z, aug, sk);
    std::vector<double> scale(static_cast<std::size_t>(sk.bone_count()));
    for (int k = 0; k < sk.bone_count(); ++k) {
      const double s = bl.bones.row(k).norm() / b.bones.row(k).norm();
      scale[static_cast<std::size_t>(k)] = s;
      CHECK(std::abs(std::log(s)) <= aug.bounds.max_log_scale + 1e-12);
      CHECK((bl.bones.row(k) / s - b.bones.row(k)).norm() < 1e-9);
    }
    for (auto [l, r] : sk.symmetric_bones) {
      CHECK(scale[static_cast<std::size_t>(l)] == doctest::Approx(scale[static_cast<std::size_t>(r)]).epsilon(1e-12));
    }

    const Pose3D rt = rt_apply(p, z, aug, sk);
    CHECK(max_distance_change(p, rt) < 1e-9);
    CHECK(pa_mpjpe(rt, p) < 1e-6);
    const Eigen::RowVector3d shift = rt.joints.row(0) - p.joints.row(0);
    CHECK(shift.cwiseAbs().maxCoeff() <= aug.bounds.max_translation_mm + 1e-9);

    const PoseStates s = augment(p, z, aug, sk);
    CHECK(s.or_state.joints == p.joints);
    CHECK((s.ba_state.joints - bones_to_joints(ba, sk).joints).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((s.ba_state.joints - s.or_state.joints).norm() > 0.0);
    CHECK((s.bl_state.joints - s.ba_state.joints).norm() > 0.0);
    CHECK((s.rt_state.joints - s.bl_state.joints).norm() > 0.0);
  }
}

TEST_CASE("rotation magnitude stays within bounds") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const AugmentorParams aug = perturbed(AugmentorKind::weak, rng, 2.0);
    Pose3D p = testing::random_pose(rng);
    p.joints.rowwise() -= p.joints.row(0).eval();
    Pose3D rt = rt_apply(p, noise(rng), aug, human16());
    rt.joints.rowwise() -= rt.joints.row(0).eval();
    // Best rotation between the centred poses.
    const Eigen::Matrix3d h = p.joints.transpose() * rt.joints;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
    const double angle = std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
    CHECK(angle <= aug.bounds.max_rotation_rad + 1e-9);
  }
}

TEST_CASE("batched states match the single-pose path") {
  std::mt19937_64 rng(24);
  const AugmentorParams aug = perturbed(AugmentorKind::strong, rng);
  Matrix poses(4, 48);
  const Matrix z = random_matrix(4, 16, rng);
  for (int i = 0; i < 4; ++i) poses.row(i) = flatten(testing::random_pose(rng));
  const BatchStates b = augment_batch(poses, z, aug, human16());
  for (int i = 0; i < 4; ++i) {
    const PoseStates s = augment(unflatten3(poses.row(i)), z.row(i).transpose(), aug, human16());
    CHECK((b.rt.row(i) - flatten(s.rt_state)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((b.ba.row(i) - flatten(s.ba_state)).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK_THROWS_AS(augment_batch(poses, random_matrix(4, 3, rng), aug, human16()), ShapeError);
}

TEST_CASE("similarity and generator losses") {
  const Skeleton chain = build_skeleton({-1, 0});
  Pose3D a;
  a.joints = Joints3::Zero(2, 3);
  Pose3D b = a;
  b.joints(1, 2) = 10.0;
  CHECK(sim_loss(a, b, chain.laplacian) == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(sim_loss(a, a, chain.laplacian) == 0.0);

  std::mt19937_64 rng(25);
  const Skeleton& sk = human16();
  const PairSets pairs = PairSets::standard();
  for (int trial = 0; trial < 20; ++trial) {
    const Pose3D x = testing::random_pose(rng);
    const Pose3D y = testing::random_pose(rng);
    CHECK(sim_loss(x, y, sk.laplacian) == doctest::Approx(sim_loss(y, x, sk.laplacian)).epsilon(1e-14));
    const PoseStates s{x, y, testing::random_pose(rng), testing::random_pose(rng)};
    double pp = 0.0, og = 0.0;
    for (auto [i, j] : pairs.pp) pp += sim_loss(s[i], s[j], sk.laplacian) / 3.0;
    for (auto [i, j] : pairs.og) og += sim_loss(s[i], s[j], sk.laplacian) / 2.0;
    CHECK(weak_gen_loss(s, pairs, sk.laplacian, 0.5) == doctest::Approx(pp + 0.5 * og).epsilon(1e-12));
    CHECK(strong_gen_loss(s, pairs, sk.laplacian, 0.35) == doctest::Approx(pp - 0.35 * og).epsilon(1e-12));
  }
  const PoseStates same{a, a, a, a};
  CHECK(weak_gen_loss(same, pairs, chain.laplacian, 0.5) == 0.0);
}

TEST_CASE("generator loss gradients match finite differences") {
  std::mt19937_64 rng(26);
  const SkeletonOperators ops = SkeletonOperators::from(human16());
  const Matrix poses = random_matrix(3, 48, rng, 300.0);
  const Matrix z = random_matrix(3, 16, rng);
  for (double og : {0.5, -0.35}) {
    for (int trial = 0; trial < 5; ++trial) {
      const AugmentorParams aug = perturbed(AugmentorKind::strong, rng, 0.1);
      const auto value = [&](const Vector& v) {
        Tape t;
        const Var pv = t.constant(v);
        const StateVars s = augment_graph(t, aug, pv, ops, t.constant(poses), t.constant(z));
        return t.scalar(gen_loss_graph(t, ops, s, PairSets::standard(), og));
      };
      Tape t;
      const Var pv = t.constant(aug.params.values);
      const StateVars s = augment_graph(t, aug, pv, ops, t.constant(poses), t.constant(z));
      const Vector g = testing::as_vector(t.grad(gen_loss_graph(t, ops, s, PairSets::standard(), og), pv));
      CHECK(testing::fd_directional_error(value, aug.params.values, g, rng) < 1e-4);
    }
  }
}

TEST_CASE("augmentor json round trip") {
  std::mt19937_64 rng(27);
  const AugmentorParams aug = perturbed(AugmentorKind::strong, rng);
  const AugmentorParams back = augmentor_from_json(nlohmann::json::parse(to_json(aug).dump()));
  CHECK(back.params.values == aug.params.values);
  CHECK(back.kind == AugmentorKind::strong);
  CHECK(back.bounds.max_rotation_rad == aug.bounds.max_rotation_rad);
  const Pose3D p = testing::random_pose(rng);
  const Vector z = noise(rng);
  CHECK(augment(p, z, back, human16()).rt_state.joints == augment(p, z, aug, human16()).rt_state.joints);
}
