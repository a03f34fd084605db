#include "helpers.hpp"

#include "dualaug/errors.hpp"
#include "dualaug/metrics.hpp"

#include <Eigen/Geometry>

using namespace dualaug;

namespace {

Pose3D similarity(const Pose3D& p, std::mt19937_64& rng) {
  const Eigen::Vector3d axis = testing::random_matrix(3, 1, rng).normalized();
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(u(rng), axis).toRotationMatrix();
  const double s = std::exp(0.5 * u(rng) / 3.0);
  const Eigen::RowVector3d t = testing::random_matrix(1, 3, rng, 500.0);
  Pose3D out;
  out.joints = ((s * p.joints * r.transpose()).rowwise() + t).eval();
  return out;
}

}  // namespace

TEST_CASE("mpjpe") {
  Pose3D gt;
  gt.joints = Joints3::Zero(16, 3);
  Pose3D pred = gt;
  pred.joints.col(0).setConstant(3.0);
  pred.joints.col(1).setConstant(4.0);
  CHECK(mpjpe(pred, gt) == 5.0);
  CHECK(mpjpe(gt, gt) == 0.0);
  Pose3D small;
  small.joints = Joints3::Zero(4, 3);
  CHECK_THROWS_AS(mpjpe(small, gt), ShapeError);
}

TEST_CASE("procrustes aligned error") {
  std::mt19937_64 rng(51);
  for (int i = 0; i < 200; ++i) {
    const Pose3D gt = testing::random_pose(rng);
    CHECK(pa_mpjpe(similarity(gt, rng), gt) < 1e-6);
  }
  for (int i = 0; i < 1000; ++i) {
    const Pose3D a = testing::random_pose(rng);
    const Pose3D b = testing::random_pose(rng);
    CHECK(pa_mpjpe(a, b) <= mpjpe(a, b) + 1e-9);
  }
  // Mirror images are not aligned by a proper rotation.
  const Pose3D gt = testing::random_pose(rng);
  Pose3D mirror = gt;
  mirror.joints.col(0) *= -1.0;
  CHECK(pa_mpjpe(mirror, gt) > 1.0);
  Pose3D flat;
  flat.joints = Joints3::Constant(16, 3, 7.0);
  CHECK_THROWS_AS(pa_mpjpe(flat, gt), DegenerateError);
}

TEST_CASE("pck and auc") {
  std::mt19937_64 rng(52);
  Pose3D gt = testing::random_pose(rng);
  gt.joints = gt.joints.array().round();
  Pose3D off = gt;
  off.joints.col(2).array() += 75.0;
  const std::vector<Pose3D> preds{off}, gts{gt};
  CHECK(pck(preds, gts) == 100.0);
  CHECK(pck(preds, gts, 75.0) == 0.0);
  CHECK(std::abs(auc(preds, gts) - 15.0 / 31.0 * 100.0) < 1e-9);
  CHECK(std::abs(auc(gts, gts) - 30.0 / 31.0 * 100.0) < 1e-9);

  const MetricSummary m = summarize("x", preds, gts);
  CHECK(m.n == 1);
  CHECK(m.mpjpe == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(metrics_csv_header() == "domain,mpjpe,pa_mpjpe,pck150,auc,n");
  CHECK(metrics_csv_row(m).rfind("x,", 0) == 0);
}
