#include "dualaug/camera.hpp"

#include "dualaug/errors.hpp"
#include "dualaug/io.hpp"

#include <json.hpp>

namespace dualaug {

using nlohmann::json;

void validate(const Camera& camera) {
  if (!(camera.fx > 0.0) || !(camera.fy > 0.0)) throw ShapeError("camera focal lengths must be positive");
  if (!(camera.subject_distance > 0.0)) throw ShapeError("camera subject_distance must be positive");
}

Pose2D project(const Pose3D& pose, const Camera& camera) {
  Pose2D out;
  out.keypoints.resize(pose.joints.rows(), 2);
  for (Eigen::Index j = 0; j < pose.joints.rows(); ++j) {
    const double depth = pose.joints(j, 2) + camera.subject_distance;
    if (!(depth > kMinDepthMm)) {
      throw BehindCameraError("joint " + std::to_string(j) + " at depth " + format_double(depth) + " mm");
    }
    out.keypoints(j, 0) = camera.fx * pose.joints(j, 0) / depth + camera.cx;
    out.keypoints(j, 1) = camera.fy * pose.joints(j, 1) / depth + camera.cy;
  }
  return out;
}

Eigen::MatrixXd project_flat(const Eigen::MatrixXd& poses, const Camera& camera) {
  if (poses.cols() % 3 != 0) throw ShapeError("project_flat: columns must be a multiple of 3");
  const Eigen::Index joints = poses.cols() / 3;
  Eigen::MatrixXd out(poses.rows(), 2 * joints);
  for (Eigen::Index n = 0; n < poses.rows(); ++n) {
    for (Eigen::Index j = 0; j < joints; ++j) {
      const double depth = poses(n, 3 * j + 2) + camera.subject_distance;
      if (!(depth > kMinDepthMm)) {
        throw BehindCameraError("sample " + std::to_string(n) + " joint " + std::to_string(j) + " at depth " +
                                format_double(depth) + " mm");
      }
      out(n, 2 * j) = camera.fx * poses(n, 3 * j) / depth + camera.cx;
      out(n, 2 * j + 1) = camera.fy * poses(n, 3 * j + 1) / depth + camera.cy;
    }
  }
  return out;
}

Eigen::MatrixXd normalize_keypoints(const Eigen::MatrixXd& keypoints, const Camera& camera) {
  Eigen::MatrixXd out(keypoints.rows(), keypoints.cols());
  for (Eigen::Index c = 0; c < keypoints.cols(); ++c) {
    if (c % 2 == 0) {
      out.col(c) = (keypoints.col(c).array() - camera.cx) / camera.fx;
    } else {
      out.col(c) = (keypoints.col(c).array() - camera.cy) / camera.fy;
    }
  }
  return out;
}

std::string camera_to_json(const Camera& camera) {
  json doc = {{"fx", camera.fx},         {"fy", camera.fy},
              {"cx", camera.cx},         {"cy", camera.cy},
              {"subject_distance", camera.subject_distance},
              {"width", camera.width},   {"height", camera.height}};
  return doc.dump(2) + "\n";
}

Camera camera_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    Camera c;
    c.fx = doc.at("fx").get<double>();
    c.fy = doc.at("fy").get<double>();
    c.cx = doc.at("cx").get<double>();
    c.cy = doc.at("cy").get<double>();
    c.subject_distance = doc.at("subject_distance").get<double>();
    c.width = doc.value("width", c.width);
    c.height = doc.value("height", c.height);
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("camera: ") + e.what());
  }
}

Camera load_camera(const std::string& path) { return camera_from_json(read_text_file(path)); }

void save_camera(const Camera& camera, const std::string& path) {
  write_text_file_atomic(path, camera_to_json(camera));
}

}  // namespace dualaug
