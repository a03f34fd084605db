#include "dualaug/data.hpp"

#include "dualaug/errors.hpp"
#include "dualaug/io.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <sstream>

namespace dualaug {

using nlohmann::json;

namespace {

struct RestBone {
  double length;
  Eigen::Vector3d direction;
};

// Keyed by child joint name. y points down in the camera frame.
const std::map<std::string, RestBone>& rest_table() {
  static const std::map<std::string, RestBone> table = {
      {"RHip", {130.0, {-1, 0, 0}}},      {"LHip", {130.0, {1, 0, 0}}},
      {"RKnee", {450.0, {0, 1, 0}}},      {"LKnee", {450.0, {0, 1, 0}}},
      {"RAnkle", {440.0, {0, 1, 0}}},     {"LAnkle", {440.0, {0, 1, 0}}},
      {"Spine", {240.0, {0, -1, 0}}},     {"Thorax", {260.0, {0, -1, 0}}},
      {"Head", {200.0, {0, -1, 0}}},      {"Neck", {100.0, {0, -1, 0}}},
      {"LShoulder", {160.0, {1, 0, 0}}},  {"RShoulder", {160.0, {-1, 0, 0}}},
      {"LElbow", {280.0, {0, 1, 0}}},     {"RElbow", {280.0, {0, 1, 0}}},
      {"LWrist", {250.0, {0, 1, 0}}},     {"RWrist", {250.0, {0, 1, 0}}},
  };
  return table;
}

const RestBone& rest_bone(const Skeleton& skeleton, int bone) {
  const int child = skeleton.bones[static_cast<std::size_t>(bone)].child;
  const std::string name =
      static_cast<std::size_t>(child) < skeleton.names.size() ? skeleton.names[static_cast<std::size_t>(child)] : "";
  const auto it = rest_table().find(name);
  if (it == rest_table().end()) throw ShapeError("no rest pose entry for joint '" + name + "'");
  return it->second;
}

DomainSpec base_spec(const std::string& name, double tilt, double yaw, double translation, int count,
                     std::uint64_t seed) {
  DomainSpec s;
  s.name = name;
  s.bone_lengths = default_bone_lengths();
  s.joint_angle_ranges.assign(s.bone_lengths.size(), {0.0, tilt});
  s.global_rotation_range = yaw;
  s.global_translation_range = translation;
  s.sample_count = count;
  s.seed = seed;
  return s;
}

}  // namespace

void validate(const DomainSpec& spec, const Skeleton& skeleton) {
  const auto b = static_cast<std::size_t>(skeleton.bone_count());
  if (spec.bone_lengths.size() != b) throw ArityError("domain '" + spec.name + "': wrong number of bone lengths");
  if (spec.joint_angle_ranges.size() != b) throw ArityError("domain '" + spec.name + "': wrong number of angle ranges");
  for (double l : spec.bone_lengths) {
    if (!(l > 0.0)) throw ShapeError("domain '" + spec.name + "': bone lengths must be positive");
  }
  for (const auto& [lo, hi] : spec.joint_angle_ranges) {
    if (!(lo <= hi)) throw ShapeError("domain '" + spec.name + "': angle range out of order");
  }
  if (!(spec.global_rotation_range >= 0.0) || !(spec.global_translation_range >= 0.0) ||
      !(spec.length_jitter >= 0.0 && spec.length_jitter < 1.0)) {
    throw ShapeError("domain '" + spec.name + "': ranges must be non-negative");
  }
  if (spec.sample_count < 0) throw ShapeError("domain '" + spec.name + "': negative sample count");
}

std::vector<double> default_bone_lengths(const Skeleton& skeleton) {
  std::vector<double> out;
  for (int b = 0; b < skeleton.bone_count(); ++b) out.push_back(rest_bone(skeleton, b).length);
  return out;
}

std::vector<Eigen::Vector3d> canonical_directions(const Skeleton& skeleton) {
  std::vector<Eigen::Vector3d> out;
  for (int b = 0; b < skeleton.bone_count(); ++b) out.push_back(rest_bone(skeleton, b).direction);
  return out;
}

Pose3D canonical_pose(const std::vector<double>& bone_lengths, const Skeleton& skeleton) {
  const auto dirs = canonical_directions(skeleton);
  BoneVectors bv;
  bv.bones.resize(skeleton.bone_count(), 3);
  for (int b = 0; b < skeleton.bone_count(); ++b) {
    bv.bones.row(b) = bone_lengths[static_cast<std::size_t>(b)] * dirs[static_cast<std::size_t>(b)].transpose();
  }
  return bones_to_joints(bv, skeleton);
}

DomainSpec source_spec() { return base_spec("source", 0.2, 0.0, 0.0, 2048, 11); }
DomainSpec target_near_spec() { return base_spec("target_near", 0.3, 0.3, 0.0, 1024, 23); }
DomainSpec target_far_spec() { return base_spec("target_far", 0.9, std::numbers::pi, 800.0, 1024, 37); }

std::vector<DomainSpec> default_domain_specs() { return {source_spec(), target_near_spec(), target_far_spec()}; }

json to_json(const DomainSpec& spec) {
  json ranges = json::array();
  for (const auto& [lo, hi] : spec.joint_angle_ranges) ranges.push_back({lo, hi});
  return {{"name", spec.name},
          {"bone_lengths", spec.bone_lengths},
          {"joint_angle_ranges", ranges},
          {"global_rotation_range", spec.global_rotation_range},
          {"global_translation_range", spec.global_translation_range},
          {"length_jitter", spec.length_jitter},
          {"sample_count", spec.sample_count},
          {"seed", spec.seed}};
}

DomainSpec domain_spec_from_json(const json& doc) {
  try {
    DomainSpec s;
    s.name = doc.at("name").get<std::string>();
    s.bone_lengths = doc.contains("bone_lengths") ? doc.at("bone_lengths").get<std::vector<double>>()
                                                  : default_bone_lengths();
    if (doc.contains("joint_angle_ranges")) {
      for (const json& r : doc.at("joint_angle_ranges")) {
        if (!r.is_array() || r.size() != 2) throw ParseError("joint_angle_ranges entries must be [min, max]");
        s.joint_angle_ranges.emplace_back(r[0].get<double>(), r[1].get<double>());
      }
    } else {
      s.joint_angle_ranges.assign(s.bone_lengths.size(), {0.0, 0.0});
    }
    s.global_rotation_range = doc.value("global_rotation_range", 0.0);
    s.global_translation_range = doc.value("global_translation_range", 0.0);
    s.length_jitter = doc.value("length_jitter", 0.02);
    s.sample_count = doc.value("sample_count", 0);
    s.seed = doc.value("seed", std::uint64_t{0});
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("domain spec: ") + e.what());
  }
}

std::vector<DomainSpec> load_domain_specs(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  std::vector<DomainSpec> out;
  if (doc.is_object() && doc.contains("domains")) {
    for (const json& d : doc.at("domains")) out.push_back(domain_spec_from_json(d));
  } else {
    out.push_back(domain_spec_from_json(doc));
  }
  return out;
}

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Pose3D sample_pose(const DomainSpec& spec, std::mt19937_64& rng, const Skeleton& skeleton) {
  const auto dirs = canonical_directions(skeleton);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo == hi ? lo : lo + (hi - lo) * unit(rng); };

  BoneVectors bv;
  bv.bones.resize(skeleton.bone_count(), 3);
  for (int b = 0; b < skeleton.bone_count(); ++b) {
    const auto i = static_cast<std::size_t>(b);
    const double length = spec.bone_lengths[i] * (1.0 + uniform(-spec.length_jitter, spec.length_jitter));
    const double tilt = uniform(spec.joint_angle_ranges[i].first, spec.joint_angle_ranges[i].second);
    const double azimuth = uniform(0.0, 2.0 * std::numbers::pi);
    const Eigen::Vector3d& d = dirs[i];
    Eigen::Vector3d e1 = d.cross(Eigen::Vector3d::UnitZ());
    if (e1.norm() < 1e-9) e1 = d.cross(Eigen::Vector3d::UnitX());
    e1.normalize();
    const Eigen::Vector3d e2 = d.cross(e1);
    const Eigen::Vector3d dir =
        std::cos(tilt) * d + std::sin(tilt) * (std::cos(azimuth) * e1 + std::sin(azimuth) * e2);
    bv.bones.row(b) = length * dir.transpose();
  }
  Pose3D pose = bones_to_joints(bv, skeleton);

  const double yaw = uniform(-spec.global_rotation_range, spec.global_rotation_range);
  Eigen::Vector3d t;
  for (int a = 0; a < 3; ++a) t(a) = uniform(-spec.global_translation_range, spec.global_translation_range);
  if (yaw != 0.0) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
    const Eigen::RowVector3d root = pose.joints.row(skeleton.root());
    for (Eigen::Index j = 0; j < pose.joints.rows(); ++j) {
      pose.joints.row(j) = (r * (pose.joints.row(j) - root).transpose()).transpose() + root;
    }
  }
  pose.joints.rowwise() += t.transpose();
  return pose;
}

Dataset generate_dataset(const DomainSpec& spec, const Camera& camera, const Skeleton& skeleton) {
  validate(spec, skeleton);
  validate(camera);
  Dataset ds;
  ds.camera = camera;
  ds.domain_name = spec.name;
  ds.pairs.resize(static_cast<std::size_t>(spec.sample_count));
  for (int i = 0; i < spec.sample_count; ++i) {
    std::mt19937_64 rng = sample_rng(spec.seed, static_cast<std::uint64_t>(i));
    PosePair& p = ds.pairs[static_cast<std::size_t>(i)];
    p.joints = sample_pose(spec, rng, skeleton);
    p.keypoints = project(p.joints, camera);
  }
  return ds;
}

namespace {

template <typename M>
void append_rows(std::string& out, const M& m) {
  out += '[';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r) out += ',';
    out += '[';
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += ']';
  }
  out += ']';
}

template <typename M>
M read_rows(const json& rows, int width) {
  if (!rows.is_array()) throw ParseError("expected an array of rows");
  M m(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const json& row = rows[r];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(width)) throw ParseError("row has the wrong width");
    for (int c = 0; c < width; ++c) m(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

std::string sibling_camera(const std::string& path) {
  return (std::filesystem::path(path).parent_path() / "camera.json").string();
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  std::string out;
  out.reserve(ds.pairs.size() * 1200);
  const std::string domain = json(ds.domain_name).dump();
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    out += "{\"id\":" + std::to_string(i) + ",\"joints3d\":";
    append_rows(out, ds.pairs[i].joints.joints);
    out += ",\"keypoints2d\":";
    append_rows(out, ds.pairs[i].keypoints.keypoints);
    out += ",\"domain\":" + domain + "}\n";
  }
  write_text_file_atomic(path, out);
  save_camera(ds.camera, sibling_camera(path));
}

Dataset load_dataset(const std::string& path, const std::string& camera_path) {
  Dataset ds;
  const std::string cam = camera_path.empty() ? sibling_camera(path) : camera_path;
  if (std::filesystem::exists(cam)) ds.camera = load_camera(cam);
  else if (!camera_path.empty()) throw IoError("camera file not found: " + cam);

  std::istringstream in(read_text_file(path));
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      PosePair p;
      p.joints.joints = read_rows<Joints3>(rec.at("joints3d"), 3);
      p.keypoints.keypoints = read_rows<Points2>(rec.at("keypoints2d"), 2);
      if (p.joints.joints.rows() != p.keypoints.keypoints.rows()) throw ParseError("joint counts differ");
      if (!ds.pairs.empty() && p.joints.joints.rows() != ds.pairs.front().joints.joints.rows()) {
        throw ParseError("joint count differs from earlier records");
      }
      if (ds.domain_name.empty()) ds.domain_name = rec.value("domain", std::string());
      ds.pairs.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(path + ": " + e.what(), number);
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), number);
    }
  }
  return ds;
}

Eigen::MatrixXd joints_matrix(const Dataset& ds) {
  if (ds.pairs.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ds.pairs.size()), ds.pairs.front().joints.joints.size());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = flatten(ds.pairs[i].joints);
  return out;
}

Eigen::MatrixXd keypoints_matrix(const Dataset& ds) {
  if (ds.pairs.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ds.pairs.size()), ds.pairs.front().keypoints.keypoints.size());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = flatten(ds.pairs[i].keypoints);
  }
  return out;
}

}  // namespace dualaug
