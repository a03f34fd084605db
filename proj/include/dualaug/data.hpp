#pragma once

#include "dualaug/camera.hpp"
#include "dualaug/skeleton.hpp"

#include <json.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace dualaug {

// Synthetic pose domain. Per-bone arrays follow Skeleton::bones order.
struct DomainSpec {
  std::string name;
  std::vector<double> bone_lengths;                        // mm
  std::vector<std::pair<double, double>> joint_angle_ranges;  // tilt from the canonical direction, rad
  double global_rotation_range = 0.0;                      // yaw about the vertical axis, +-rad
  double global_translation_range = 0.0;                   // per axis, +-mm
  double length_jitter = 0.02;                             // relative, +-
  int sample_count = 0;
  std::uint64_t seed = 0;
};

void validate(const DomainSpec& spec, const Skeleton& skeleton = human16());

// Anthropometric defaults for the 16-joint model, in bone order.
std::vector<double> default_bone_lengths(const Skeleton& skeleton = human16());
// Unit direction of each bone in the upright rest pose (camera frame, y down).
std::vector<Eigen::Vector3d> canonical_directions(const Skeleton& skeleton = human16());
Pose3D canonical_pose(const std::vector<double>& bone_lengths, const Skeleton& skeleton = human16());

DomainSpec source_spec();
DomainSpec target_near_spec();
DomainSpec target_far_spec();
std::vector<DomainSpec> default_domain_specs();

nlohmann::json to_json(const DomainSpec& spec);
DomainSpec domain_spec_from_json(const nlohmann::json& doc);
// File holds either one spec object or {"domains": [...]}.
std::vector<DomainSpec> load_domain_specs(const std::string& path);

// Camera-frame pose (root at the drawn translation).
Pose3D sample_pose(const DomainSpec& spec, std::mt19937_64& rng, const Skeleton& skeleton = human16());
// Independent stream for sample `index` of a domain.
std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index);

struct PosePair {
  Pose2D keypoints;  // pixels
  Pose3D joints;     // camera frame, mm
};

struct Dataset {
  std::vector<PosePair> pairs;
  Camera camera;
  std::string domain_name;

  std::size_t size() const { return pairs.size(); }
};

Dataset generate_dataset(const DomainSpec& spec, const Camera& camera, const Skeleton& skeleton = human16());

// JSONL, one record per line; the camera goes to a sibling camera.json.
void save_dataset(const Dataset& ds, const std::string& path);
// Camera is read from `camera_path`, or the sibling camera.json when empty.
Dataset load_dataset(const std::string& path, const std::string& camera_path = "");

Eigen::MatrixXd joints_matrix(const Dataset& ds);     // N x 3J
Eigen::MatrixXd keypoints_matrix(const Dataset& ds);  // N x 2J

}  // namespace dualaug
