#include "helpers.hpp"

#include "dualaug/camera.hpp"
#include "dualaug/errors.hpp"

#include <filesystem>

using namespace dualaug;

namespace {

Pose3D single(double x, double y, double z) {
  Pose3D p;
  p.joints.resize(1, 3);
  p.joints << x, y, z;
  return p;
}

}  // namespace

TEST_CASE("pinhole projection") {
  const Camera cam;
  const Pose2D a = project(single(0, 0, 0), cam);
  CHECK(a.keypoints(0, 0) == 500.0);
  CHECK(a.keypoints(0, 1) == 500.0);
  const Pose2D b = project(single(1000, 0, 0), cam);
  CHECK(b.keypoints(0, 0) == doctest::Approx(700.0).epsilon(1e-15));
  CHECK(b.keypoints(0, 1) == 500.0);
  CHECK_THROWS_AS(project(single(0, 0, -5000), cam), BehindCameraError);
  CHECK_THROWS_AS(project(single(0, 0, -4900), cam), BehindCameraError);
  CHECK_NOTHROW(project(single(0, 0, -4899), cam));
}

TEST_CASE("projection scale and depth behaviour") {
  const Camera cam;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-800, 800);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng), y = u(rng), z = u(rng);
    const Pose2D p1 = project(single(x, y, z), cam);
    const Pose2D p2 = project(single(2 * x, 2 * y, z), cam);
    CHECK(std::abs((p2.keypoints(0, 0) - cam.cx) - 2 * (p1.keypoints(0, 0) - cam.cx)) < 1e-9);
    CHECK(std::abs((p2.keypoints(0, 1) - cam.cy) - 2 * (p1.keypoints(0, 1) - cam.cy)) < 1e-9);
    const Pose2D far = project(single(x, y, z + 100), cam);
    CHECK(std::abs(far.keypoints(0, 0) - cam.cx) < std::abs(p1.keypoints(0, 0) - cam.cx));
  }
}

TEST_CASE("batched projection matches the per-pose form") {
  const Camera cam;
  std::mt19937_64 rng(4);
  Matrix poses(5, 48);
  std::vector<Pose3D> list;
  for (int i = 0; i < 5; ++i) {
    list.push_back(testing::random_pose(rng));
    poses.row(i) = flatten(list.back());
  }
  const Matrix flat = project_flat(poses, cam);
  for (int i = 0; i < 5; ++i) CHECK((flat.row(i) - flatten(project(list[static_cast<std::size_t>(i)], cam))).norm() == 0.0);
  const Matrix n = normalize_keypoints(flat, cam);
  CHECK(n(0, 0) == doctest::Approx((flat(0, 0) - 500.0) / 1000.0));
}

TEST_CASE("camera file") {
  Camera cam;
  cam.fx = 1145.0;
  cam.cy = 512.25;
  const auto path = (std::filesystem::temp_directory_path() / "dualaug_camera_test.json").string();
  save_camera(cam, path);
  const Camera back = load_camera(path);
  CHECK(back.fx == cam.fx);
  CHECK(back.cy == cam.cy);
  CHECK(back.subject_distance == cam.subject_distance);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(camera_from_json("{\"fx\": -1, \"fy\": 1, \"cx\": 0, \"cy\": 0, \"subject_distance\": 10}"),
                  ShapeError);
}
