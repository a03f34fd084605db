#include "dualaug/augmentor.hpp"

#include "dualaug/checkpoint.hpp"
#include "dualaug/errors.hpp"

#include <cmath>
#include <numbers>

namespace dualaug {

using nlohmann::json;

std::string to_string(AugmentorKind kind) { return kind == AugmentorKind::weak ? "weak" : "strong"; }

AugmentorKind augmentor_kind_from_string(const std::string& name) {
  if (name == "weak") return AugmentorKind::weak;
  if (name == "strong") return AugmentorKind::strong;
  throw ParseError("unknown augmentor kind: " + name);
}

AugmentorBounds AugmentorBounds::weak_defaults() { return {0.25, 0.15, 300.0, 0.3}; }

AugmentorBounds AugmentorBounds::strong_defaults() { return {0.8, 0.4, 1000.0, std::numbers::pi}; }

namespace {

std::vector<int> make_length_groups(const Skeleton& skeleton, bool tie) {
  std::vector<int> group(static_cast<std::size_t>(skeleton.bone_count()), -1);
  if (tie) {
    for (auto [left, right] : skeleton.symmetric_bones) group[static_cast<std::size_t>(right)] = left;
  }
  // Renumber so every free bone and every left bone owns one output.
  std::vector<int> out_index(group.size(), -1);
  int next = 0;
  for (std::size_t b = 0; b < group.size(); ++b) {
    if (group[b] < 0) out_index[b] = next++;
  }
  for (std::size_t b = 0; b < group.size(); ++b) {
    if (group[b] >= 0) out_index[b] = out_index[static_cast<std::size_t>(group[b])];
  }
  return out_index;
}

int group_count(const std::vector<int>& groups) {
  int g = 0;
  for (int v : groups) g = std::max(g, v + 1);
  return g;
}

void add_head(ParamStore& store, GeneratorHead& head, const std::string& prefix, std::mt19937_64& rng) {
  ParamStore p = init_mlp(head.spec, rng);
  head.offset = store.layout.total();
  head.size = p.size();
  for (const auto& seg : p.layout.segments) store.layout.append(prefix + seg.name, seg.rows, seg.cols);
  Vector joined(store.values.size() + p.values.size());
  joined << store.values, p.values;
  store.values = std::move(joined);
}

std::vector<int> component_cols(int count, int component) {
  std::vector<int> idx(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) idx[static_cast<std::size_t>(k)] = 3 * k + component;
  return idx;
}

std::vector<int> repeat_each(const std::vector<int>& src, int times) {
  std::vector<int> out;
  out.reserve(src.size() * static_cast<std::size_t>(times));
  for (int v : src) {
    for (int t = 0; t < times; ++t) out.push_back(v);
  }
  return out;
}

struct Xyz {
  Var x;
  Var y;
  Var z;
};

Xyz split_xyz(Tape& tape, Var v, int count) {
  return {tape.gather_cols(v, component_cols(count, 0)), tape.gather_cols(v, component_cols(count, 1)),
          tape.gather_cols(v, component_cols(count, 2))};
}

Var join_xyz(Tape& tape, const Xyz& v, int count) {
  const int cols = 3 * count;
  Var out = tape.scatter_cols(v.x, component_cols(count, 0), cols);
  out = tape.add(out, tape.scatter_cols(v.y, component_cols(count, 1), cols));
  return tape.add(out, tape.scatter_cols(v.z, component_cols(count, 2), cols));
}

Var squared_norm(Tape& tape, const Xyz& v) {
  return tape.add(tape.add(tape.square(v.x), tape.square(v.y)), tape.square(v.z));
}

// Bounded axis-angle: w = max_angle * tanh(|o|) * o / |o|, so |w| <= max_angle.
Xyz bounded_axis_angle(Tape& tape, const Xyz& o, double max_angle) {
  const Var f = tape.scale(tape.unary(squared_norm(tape, o), UnaryFn::TanhcSqrt), max_angle);
  return {tape.mul(f, o.x), tape.mul(f, o.y), tape.mul(f, o.z)};
}

// Rodrigues rotation of v by axis-angle w, written with functions of |w|^2
// that are smooth at zero.
Xyz rotate(Tape& tape, const Xyz& v, const Xyz& w) {
  const Var s = squared_norm(tape, w);
  const Var c = tape.unary(s, UnaryFn::CosSqrt);
  const Var a = tape.unary(s, UnaryFn::SincSqrt);
  const Var b = tape.unary(s, UnaryFn::VersSqrt);
  const Xyz cross{tape.sub(tape.mul(w.y, v.z), tape.mul(w.z, v.y)), tape.sub(tape.mul(w.z, v.x), tape.mul(w.x, v.z)),
                  tape.sub(tape.mul(w.x, v.y), tape.mul(w.y, v.x))};
  const Var dot = tape.add(tape.add(tape.mul(w.x, v.x), tape.mul(w.y, v.y)), tape.mul(w.z, v.z));
  const Var bd = tape.mul(b, dot);
  auto comp = [&](Var vc, Var cc, Var wc) { return tape.add(tape.add(tape.mul(c, vc), tape.mul(a, cc)), tape.mul(bd, wc)); };
  return {comp(v.x, cross.x, w.x), comp(v.y, cross.y, w.y), comp(v.z, cross.z, w.z)};
}

// Unit bone directions concatenated with noise: the generator conditioning.
Var head_input(Tape& tape, Var bones, Var noise, int bone_count) {
  const Xyz b = split_xyz(tape, bones, bone_count);
  const Var inv = tape.unary(tape.add_scalar(squared_norm(tape, b), 1e-12), UnaryFn::Rsqrt);
  const Var unit = join_xyz(tape, {tape.mul(b.x, inv), tape.mul(b.y, inv), tape.mul(b.z, inv)}, bone_count);
  const int bc = 3 * bone_count;
  const int nd = static_cast<int>(tape.value(noise).cols());
  std::vector<int> first(static_cast<std::size_t>(bc));
  std::vector<int> second(static_cast<std::size_t>(nd));
  for (int k = 0; k < bc; ++k) first[static_cast<std::size_t>(k)] = k;
  for (int k = 0; k < nd; ++k) second[static_cast<std::size_t>(k)] = bc + k;
  return tape.add(tape.scatter_cols(unit, first, bc + nd), tape.scatter_cols(noise, second, bc + nd));
}

Var head_forward(Tape& tape, const GeneratorHead& head, Var params, Var input) {
  return mlp_forward(head.spec, tape, tape.slice_rows(params, head.offset, head.size), input);
}

void check_noise(const Tape& tape, Var noise, const AugmentorParams& aug, Eigen::Index rows) {
  const Matrix& n = tape.value(noise);
  if (n.cols() != aug.noise_dim || n.rows() != rows) {
    throw ShapeError("noise must be " + std::to_string(rows) + " x " + std::to_string(aug.noise_dim));
  }
}

}  // namespace

AugmentorParams make_augmentor(AugmentorKind kind, const Skeleton& skeleton, std::mt19937_64& rng,
                               const AugmentorBounds& bounds, const AugmentorOptions& options) {
  if (!(bounds.max_angle_rad > 0) || !(bounds.max_log_scale > 0) || !(bounds.max_translation_mm > 0) ||
      !(bounds.max_rotation_rad > 0)) {
    throw ShapeError("augmentor bounds must be positive");
  }
  if (options.noise_dim < 0) throw ShapeError("noise_dim must be non-negative");
  AugmentorParams aug;
  aug.kind = kind;
  aug.noise_dim = options.noise_dim;
  aug.bounds = bounds;
  aug.tie_lengths = options.tie_lengths;
  aug.length_groups = make_length_groups(skeleton, options.tie_lengths);

  const int nb = skeleton.bone_count();
  const int in = 3 * nb + options.noise_dim;
  aug.ba.spec = {in, options.hidden_dims, 3 * nb, 0.01, true, 0};
  aug.bl.spec = {in, options.hidden_dims, group_count(aug.length_groups), 0.01, true, 0};
  aug.rt.spec = {in, options.hidden_dims, 6, 0.01, true, 0};
  add_head(aug.params, aug.ba, "ba.", rng);
  add_head(aug.params, aug.bl, "bl.", rng);
  add_head(aug.params, aug.rt, "rt.", rng);
  return aug;
}

const Pose3D& PoseStates::operator[](PoseState s) const {
  switch (s) {
    case PoseState::OR: return or_state;
    case PoseState::BA: return ba_state;
    case PoseState::BL: return bl_state;
    case PoseState::RT: return rt_state;
  }
  return or_state;
}

Var StateVars::operator[](PoseState s) const {
  switch (s) {
    case PoseState::OR: return or_state;
    case PoseState::BA: return ba;
    case PoseState::BL: return bl;
    case PoseState::RT: return rt;
  }
  return or_state;
}

PairSets PairSets::standard() {
  using S = PoseState;
  return {{{{S::OR, S::BA}, {S::BA, S::BL}, {S::BL, S::RT}}}, {{{S::OR, S::BL}, {S::BA, S::RT}}}};
}

SkeletonOperators SkeletonOperators::from(const Skeleton& skeleton) {
  SkeletonOperators ops;
  ops.bone_matrix = dualaug::bone_matrix(skeleton);
  ops.fk_matrix = dualaug::fk_matrix(skeleton);
  ops.laplacian_kron_t = laplacian_kron(skeleton).transpose();
  ops.joints = skeleton.joint_count();
  ops.bones = skeleton.bone_count();
  ops.root = skeleton.root();
  return ops;
}

Var ba_graph(Tape& tape, const AugmentorParams& aug, Var params, const SkeletonOperators& ops, Var bones, Var noise) {
  check_noise(tape, noise, aug, tape.value(bones).rows());
  const Var o = head_forward(tape, aug.ba, params, head_input(tape, bones, noise, ops.bones));
  const Xyz w = bounded_axis_angle(tape, split_xyz(tape, o, ops.bones), aug.bounds.max_angle_rad);
  return join_xyz(tape, rotate(tape, split_xyz(tape, bones, ops.bones), w), ops.bones);
}

Var bl_graph(Tape& tape, const AugmentorParams& aug, Var params, const SkeletonOperators& ops, Var bones, Var noise) {
  check_noise(tape, noise, aug, tape.value(bones).rows());
  const Var o = head_forward(tape, aug.bl, params, head_input(tape, bones, noise, ops.bones));
  const Var scale = tape.exp(tape.scale(tape.tanh(o), aug.bounds.max_log_scale));
  const Var per_coord = tape.gather_cols(scale, repeat_each(aug.length_groups, 3));
  return tape.mul(bones, per_coord);
}

Var root_relative_graph(Tape& tape, Var poses, int joints, int root) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(3 * joints));
  for (int j = 0; j < joints; ++j) {
    for (int c = 0; c < 3; ++c) idx.push_back(3 * root + c);
  }
  return tape.sub(poses, tape.gather_cols(poses, std::move(idx)));
}

Var rt_graph(Tape& tape, const AugmentorParams& aug, Var params, const SkeletonOperators& ops, Var joints, Var noise) {
  check_noise(tape, noise, aug, tape.value(joints).rows());
  const Var bones = tape.matmul(joints, tape.constant(ops.bone_matrix));
  const Var o = head_forward(tape, aug.rt, params, head_input(tape, bones, noise, ops.bones));

  const std::vector<int> spread(static_cast<std::size_t>(ops.joints), 0);
  auto column = [&](int c) { return tape.gather_cols(tape.gather_cols(o, {c}), spread); };
  const Xyz w = bounded_axis_angle(tape, {column(0), column(1), column(2)}, aug.bounds.max_rotation_rad);

  const Var translation = tape.scale(tape.tanh(tape.gather_cols(o, {3, 4, 5})), aug.bounds.max_translation_mm);
  std::vector<int> tile_idx;
  for (int j = 0; j < ops.joints; ++j) {
    for (int c = 0; c < 3; ++c) tile_idx.push_back(c);
  }

  // joints + (R rel - rel) + t keeps the zero-output case bit-exact.
  const Var rel = root_relative_graph(tape, joints, ops.joints, ops.root);
  const Var rotated = join_xyz(tape, rotate(tape, split_xyz(tape, rel, ops.joints), w), ops.joints);
  return tape.add(tape.add(joints, tape.sub(rotated, rel)), tape.gather_cols(translation, std::move(tile_idx)));
}

StateVars augment_graph(Tape& tape, const AugmentorParams& aug, Var params, const SkeletonOperators& ops, Var poses,
                        Var noise) {
  if (tape.value(poses).cols() != 3 * ops.joints) throw ShapeError("augment: pose width does not match skeleton");
  StateVars s;
  s.or_state = poses;
  const Var fk = tape.constant(ops.fk_matrix);
  // States are written as the previous state plus the bone delta pushed
  // through forward kinematics, so unchanged bones reproduce joints exactly.
  const Var bones = tape.matmul(poses, tape.constant(ops.bone_matrix));
  const Var ba_bones = ba_graph(tape, aug, params, ops, bones, noise);
  s.ba = tape.add(poses, tape.matmul(tape.sub(ba_bones, bones), fk));
  const Var bl_bones = bl_graph(tape, aug, params, ops, ba_bones, noise);
  s.bl = tape.add(s.ba, tape.matmul(tape.sub(bl_bones, ba_bones), fk));
  s.rt = rt_graph(tape, aug, params, ops, s.bl, noise);
  return s;
}

Var sim_loss_graph(Tape& tape, const SkeletonOperators& ops, Var a, Var b) {
  const Var d = tape.sub(a, b);
  const Var ld = tape.matmul(d, tape.constant(ops.laplacian_kron_t));
  return tape.add(tape.mean(tape.square(d)), tape.mean(tape.square(ld)));
}

Var gen_loss_graph(Tape& tape, const SkeletonOperators& ops, const StateVars& states, const PairSets& pairs,
                   double og_weight) {
  Var pp = sim_loss_graph(tape, ops, states[pairs.pp[0].first], states[pairs.pp[0].second]);
  for (std::size_t i = 1; i < pairs.pp.size(); ++i) {
    pp = tape.add(pp, sim_loss_graph(tape, ops, states[pairs.pp[i].first], states[pairs.pp[i].second]));
  }
  Var og = sim_loss_graph(tape, ops, states[pairs.og[0].first], states[pairs.og[0].second]);
  for (std::size_t i = 1; i < pairs.og.size(); ++i) {
    og = tape.add(og, sim_loss_graph(tape, ops, states[pairs.og[i].first], states[pairs.og[i].second]));
  }
  return tape.add(tape.scale(pp, 1.0 / static_cast<double>(pairs.pp.size())),
                  tape.scale(og, og_weight / static_cast<double>(pairs.og.size())));
}

BatchStates augment_batch(const Matrix& poses, const Matrix& noise, const AugmentorParams& aug, const Skeleton& skeleton) {
  Tape tape;
  const SkeletonOperators ops = SkeletonOperators::from(skeleton);
  const StateVars s = augment_graph(tape, aug, tape.constant(aug.params.values), ops, tape.constant(poses),
                                    tape.constant(noise));
  return {tape.value(s.or_state), tape.value(s.ba), tape.value(s.bl), tape.value(s.rt)};
}

Matrix root_relative(const Matrix& poses, int root) {
  Matrix out = poses;
  const Eigen::Index joints = poses.cols() / 3;
  for (Eigen::Index j = 0; j < joints; ++j) {
    for (int c = 0; c < 3; ++c) out.col(3 * j + c) -= poses.col(3 * root + c);
  }
  return out;
}

namespace {

Matrix bones_row(const BoneVectors& b) {
  Matrix row(1, b.bones.size());
  for (Eigen::Index i = 0; i < b.bones.rows(); ++i) {
    for (int c = 0; c < 3; ++c) row(0, 3 * i + c) = b.bones(i, c);
  }
  return row;
}

BoneVectors bones_from_row(const Matrix& row, const Eigen::Vector3d& root) {
  BoneVectors out;
  out.bones.resize(row.cols() / 3, 3);
  for (Eigen::Index i = 0; i < out.bones.rows(); ++i) {
    for (int c = 0; c < 3; ++c) out.bones(i, c) = row(0, 3 * i + c);
  }
  out.root = root;
  return out;
}

Matrix noise_row(const Vector& noise) { return noise.transpose(); }

}  // namespace

BoneVectors ba_apply(const BoneVectors& bones, const Vector& noise, const AugmentorParams& aug, const Skeleton& skeleton) {
  Tape tape;
  const auto ops = SkeletonOperators::from(skeleton);
  const Var out = ba_graph(tape, aug, tape.constant(aug.params.values), ops, tape.constant(bones_row(bones)),
                           tape.constant(noise_row(noise)));
  return bones_from_row(tape.value(out), bones.root);
}

BoneVectors bl_apply(const BoneVectors& bones, const Vector& noise, const AugmentorParams& aug, const Skeleton& skeleton) {
  Tape tape;
  const auto ops = SkeletonOperators::from(skeleton);
  const Var out = bl_graph(tape, aug, tape.constant(aug.params.values), ops, tape.constant(bones_row(bones)),
                           tape.constant(noise_row(noise)));
  return bones_from_row(tape.value(out), bones.root);
}

Pose3D rt_apply(const Pose3D& pose, const Vector& noise, const AugmentorParams& aug, const Skeleton& skeleton) {
  Tape tape;
  const auto ops = SkeletonOperators::from(skeleton);
  const Var out = rt_graph(tape, aug, tape.constant(aug.params.values), ops, tape.constant(Matrix(flatten(pose))),
                           tape.constant(noise_row(noise)));
  return unflatten3(tape.value(out).row(0));
}

PoseStates augment(const Pose3D& pose, const Vector& noise, const AugmentorParams& aug, const Skeleton& skeleton) {
  const BatchStates b = augment_batch(Matrix(flatten(pose)), noise_row(noise), aug, skeleton);
  return {pose, unflatten3(b.ba.row(0)), unflatten3(b.bl.row(0)), unflatten3(b.rt.row(0))};
}

double sim_loss(const Pose3D& a, const Pose3D& b, const Eigen::MatrixXd& laplacian) {
  if (a.joints.rows() != b.joints.rows() || a.joints.rows() != laplacian.rows()) {
    throw ShapeError("sim_loss: poses and laplacian disagree on joint count");
  }
  const Joints3 d = a.joints - b.joints;
  const Joints3 ld = laplacian * d;
  const auto n = static_cast<double>(d.size());
  return d.squaredNorm() / n + ld.squaredNorm() / n;
}

namespace {

double gen_loss(const PoseStates& s, const PairSets& pairs, const Eigen::MatrixXd& lap, double og_weight) {
  double pp = 0.0;
  for (auto [x, y] : pairs.pp) pp += sim_loss(s[x], s[y], lap);
  double og = 0.0;
  for (auto [x, y] : pairs.og) og += sim_loss(s[x], s[y], lap);
  return pp / static_cast<double>(pairs.pp.size()) + og_weight * og / static_cast<double>(pairs.og.size());
}

}  // namespace

double weak_gen_loss(const PoseStates& states, const PairSets& pairs, const Eigen::MatrixXd& laplacian, double alpha1) {
  return gen_loss(states, pairs, laplacian, alpha1);
}

double strong_gen_loss(const PoseStates& states, const PairSets& pairs, const Eigen::MatrixXd& laplacian, double alpha2) {
  return gen_loss(states, pairs, laplacian, -alpha2);
}

json to_json(const AugmentorParams& aug) {
  auto head = [](const GeneratorHead& h) { return json{{"spec", to_json(h.spec)}, {"offset", h.offset}, {"size", h.size}}; };
  return {{"format", "dualaug-augmentor/1"},
          {"kind", to_string(aug.kind)},
          {"noise_dim", aug.noise_dim},
          {"tie_lengths", aug.tie_lengths},
          {"bounds",
           {{"max_angle_rad", aug.bounds.max_angle_rad},
            {"max_log_scale", aug.bounds.max_log_scale},
            {"max_translation_mm", aug.bounds.max_translation_mm},
            {"max_rotation_rad", aug.bounds.max_rotation_rad}}},
          {"length_groups", aug.length_groups},
          {"heads", {{"ba", head(aug.ba)}, {"bl", head(aug.bl)}, {"rt", head(aug.rt)}}},
          {"params", to_json(aug.params)}};
}

AugmentorParams augmentor_from_json(const json& doc) {
  try {
    AugmentorParams aug;
    aug.kind = augmentor_kind_from_string(doc.at("kind").get<std::string>());
    aug.noise_dim = doc.at("noise_dim").get<int>();
    aug.tie_lengths = doc.value("tie_lengths", true);
    const auto& b = doc.at("bounds");
    aug.bounds = {b.at("max_angle_rad").get<double>(), b.at("max_log_scale").get<double>(),
                  b.at("max_translation_mm").get<double>(), b.at("max_rotation_rad").get<double>()};
    aug.length_groups = doc.at("length_groups").get<std::vector<int>>();
    auto head = [](const json& h) {
      GeneratorHead g;
      g.spec = mlp_spec_from_json(h.at("spec"));
      g.offset = h.at("offset").get<int>();
      g.size = h.at("size").get<int>();
      if (g.size != mlp_layout(g.spec).total()) throw ParseError("generator head size does not match its spec");
      return g;
    };
    const auto& heads = doc.at("heads");
    aug.ba = head(heads.at("ba"));
    aug.bl = head(heads.at("bl"));
    aug.rt = head(heads.at("rt"));
    aug.params = param_store_from_json(doc.at("params"));
    if (aug.rt.offset + aug.rt.size != aug.params.size()) throw ParseError("augmentor parameter count mismatch");
    return aug;
  } catch (const json::exception& e) {
    throw ParseError(std::string("augmentor: ") + e.what());
  }
}

}  // namespace dualaug
