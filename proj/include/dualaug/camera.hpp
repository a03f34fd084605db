#pragma once

#include "dualaug/skeleton.hpp"

#include <string>

namespace dualaug {

// Zero-skew pinhole camera. Poses are placed `subject_distance` mm down the
// optical axis before projection.
struct Camera {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 500.0;
  double cy = 500.0;
  double subject_distance = 5000.0;
  int width = 1000;
  int height = 1000;
};

inline constexpr double kMinDepthMm = 100.0;

void validate(const Camera& camera);

// Throws BehindCameraError when any joint has z + subject_distance <= 100 mm.
Pose2D project(const Pose3D& pose, const Camera& camera);

// Batched form over row-flattened poses (N x 3J) -> (N x 2J) pixels.
Eigen::MatrixXd project_flat(const Eigen::MatrixXd& poses, const Camera& camera);

// (u - cx)/fx, (v - cy)/fy on row-flattened keypoints (N x 2J).
Eigen::MatrixXd normalize_keypoints(const Eigen::MatrixXd& keypoints, const Camera& camera);

Camera load_camera(const std::string& path);
void save_camera(const Camera& camera, const std::string& path);
std::string camera_to_json(const Camera& camera);
Camera camera_from_json(const std::string& text);

}  // namespace dualaug
