#include "dualaug/trainer.hpp"

#include "dualaug/diffcore.hpp"
#include "dualaug/errors.hpp"
#include "dualaug/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace dualaug {

using nlohmann::json;

// ---------------------------------------------------------------- config

void validate(const TrainConfig& cfg) {
  validate(cfg.meta);
  if (!(cfg.gen_lr > 0.0) || !(cfg.disc_lr > 0.0)) throw ShapeError("learning rates must be positive");
  if (!(cfg.alpha1 >= 0.0) || !(cfg.alpha2 >= 0.0) || !(cfg.beta1 >= 0.0) || !(cfg.beta2 >= 0.0)) {
    throw ShapeError("loss weights must be non-negative");
  }
  if (cfg.batch_size < 1) throw ShapeError("batch_size must be positive");
  if (cfg.epochs < 0 || cfg.warmup_epochs < 0) throw ShapeError("epoch counts must be non-negative");
  if (cfg.n_critic < 0) throw ShapeError("n_critic must be non-negative");
  if (cfg.flags.weak_only && cfg.flags.strong_only) throw ShapeError("weak_only and strong_only are exclusive");
  if (cfg.noise_dim < 1 || cfg.estimator_width < 1 || cfg.estimator_blocks < 0) {
    throw ShapeError("network sizes must be positive");
  }
  if (cfg.checkpoint_every < 0 || cfg.eval_batch < 1) throw ShapeError("checkpoint_every/eval_batch out of range");
}

json to_json(const TrainConfig& cfg) {
  return {
      {"alpha1", cfg.alpha1},
      {"alpha2", cfg.alpha2},
      {"beta1", cfg.beta1},
      {"beta2", cfg.beta2},
      {"gen_lr", cfg.gen_lr},
      {"disc_lr", cfg.disc_lr},
      {"lr1", cfg.meta.lr1},
      {"lr2", cfg.meta.lr2},
      {"gamma", cfg.meta.gamma},
      {"k", cfg.meta.k},
      {"order", to_string(cfg.meta.order)},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"warmup_epochs", cfg.warmup_epochs},
      {"feedback_weight", cfg.feedback_weight},
      {"n_critic", cfg.n_critic},
      {"seed", cfg.seed},
      {"diffgen", cfg.flags.diffgen},
      {"diffdis", cfg.flags.diffdis},
      {"metaopt", cfg.flags.metaopt},
      {"weak_only", cfg.flags.weak_only},
      {"strong_only", cfg.flags.strong_only},
      {"source_only", cfg.source_only},
      {"weight_decay", cfg.weight_decay},
      {"gan_beta1", cfg.gan_beta1},
      {"gan_beta2", cfg.gan_beta2},
      {"gp_squared", cfg.gp_squared},
      {"noise_dim", cfg.noise_dim},
      {"generator_hidden", cfg.generator_hidden},
      {"critic_hidden", cfg.critic_hidden},
      {"estimator_width", cfg.estimator_width},
      {"estimator_blocks", cfg.estimator_blocks},
      {"weak_max_angle", cfg.weak_bounds.max_angle_rad},
      {"weak_max_log_scale", cfg.weak_bounds.max_log_scale},
      {"weak_max_translation", cfg.weak_bounds.max_translation_mm},
      {"weak_max_rotation", cfg.weak_bounds.max_rotation_rad},
      {"strong_max_angle", cfg.strong_bounds.max_angle_rad},
      {"strong_max_log_scale", cfg.strong_bounds.max_log_scale},
      {"strong_max_translation", cfg.strong_bounds.max_translation_mm},
      {"strong_max_rotation", cfg.strong_bounds.max_rotation_rad},
      {"checkpoint_every", cfg.checkpoint_every},
      {"eval_batch", cfg.eval_batch},
  };
}

TrainConfig train_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("train config must be a JSON object");
  TrainConfig cfg;
  const json known = to_json(cfg);
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ParseError("unknown train config key: " + key);
  }
  try {
    const auto get = [&](const char* key, auto& field) {
      if (doc.contains(key)) field = doc.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("alpha1", cfg.alpha1);
    get("alpha2", cfg.alpha2);
    get("beta1", cfg.beta1);
    get("beta2", cfg.beta2);
    get("gen_lr", cfg.gen_lr);
    get("disc_lr", cfg.disc_lr);
    get("lr1", cfg.meta.lr1);
    get("lr2", cfg.meta.lr2);
    get("gamma", cfg.meta.gamma);
    get("k", cfg.meta.k);
    if (doc.contains("order")) cfg.meta.order = meta_order_from_string(doc.at("order").get<std::string>());
    get("batch_size", cfg.batch_size);
    get("epochs", cfg.epochs);
    get("warmup_epochs", cfg.warmup_epochs);
    get("feedback_weight", cfg.feedback_weight);
    get("n_critic", cfg.n_critic);
    get("seed", cfg.seed);
    get("diffgen", cfg.flags.diffgen);
    get("diffdis", cfg.flags.diffdis);
    get("metaopt", cfg.flags.metaopt);
    get("weak_only", cfg.flags.weak_only);
    get("strong_only", cfg.flags.strong_only);
    get("source_only", cfg.source_only);
    get("weight_decay", cfg.weight_decay);
    get("gan_beta1", cfg.gan_beta1);
    get("gan_beta2", cfg.gan_beta2);
    get("gp_squared", cfg.gp_squared);
    get("noise_dim", cfg.noise_dim);
    get("generator_hidden", cfg.generator_hidden);
    get("critic_hidden", cfg.critic_hidden);
    get("estimator_width", cfg.estimator_width);
    get("estimator_blocks", cfg.estimator_blocks);
    get("weak_max_angle", cfg.weak_bounds.max_angle_rad);
    get("weak_max_log_scale", cfg.weak_bounds.max_log_scale);
    get("weak_max_translation", cfg.weak_bounds.max_translation_mm);
    get("weak_max_rotation", cfg.weak_bounds.max_rotation_rad);
    get("strong_max_angle", cfg.strong_bounds.max_angle_rad);
    get("strong_max_log_scale", cfg.strong_bounds.max_log_scale);
    get("strong_max_translation", cfg.strong_bounds.max_translation_mm);
    get("strong_max_rotation", cfg.strong_bounds.max_rotation_rad);
    get("checkpoint_every", cfg.checkpoint_every);
    get("eval_batch", cfg.eval_batch);
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  try {
    return train_config_from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names = {"full", "diffgen", "diffdis", "metaopt", "wa", "sa", "source_only"};
  return names;
}

TrainConfig apply_ablation(TrainConfig cfg, const std::string& name) {
  if (name == "full") return cfg;
  if (name == "diffgen") cfg.flags.diffgen = false;
  else if (name == "diffdis") cfg.flags.diffdis = false;
  else if (name == "metaopt") cfg.flags.metaopt = false;
  else if (name == "wa") cfg.flags.weak_only = true;
  else if (name == "sa") cfg.flags.strong_only = true;
  else if (name == "source_only") cfg.source_only = true;
  else throw ParseError("unknown ablation: " + name);
  return cfg;
}

// ---------------------------------------------------------------- state

TrainContext TrainContext::make(const Skeleton& skeleton, const Camera& camera) {
  return {skeleton, SkeletonOperators::from(skeleton), camera};
}

namespace {

OptimizerState gan_optimizer(double lr, int size, const TrainConfig& cfg) {
  OptimizerState opt = make_optimizer(OptimizerKind::adam, lr, size);
  opt.beta1 = cfg.gan_beta1;
  opt.beta2 = cfg.gan_beta2;
  return opt;
}

OptimizerState estimator_optimizer(const TrainConfig& cfg, int size) {
  OptimizerState opt = make_optimizer(OptimizerKind::adamw, cfg.meta.lr2, size);
  opt.weight_decay = cfg.weight_decay;
  return opt;
}

bool weak_active(const TrainConfig& cfg) { return !cfg.source_only && !cfg.flags.strong_only; }
bool strong_active(const TrainConfig& cfg) { return !cfg.source_only && !cfg.flags.weak_only; }

}  // namespace

TrainState make_train_state(const TrainConfig& cfg, const TrainContext& ctx) {
  validate(cfg);
  TrainState s;
  s.rng.seed(cfg.seed);
  const int joints = ctx.skeleton.joint_count();
  s.estimator = make_estimator(joints, ctx.skeleton.root(), s.rng, {cfg.estimator_width, cfg.estimator_blocks});
  s.estimator_opt = estimator_optimizer(cfg, s.estimator.params.size());

  AugmentorOptions aug_opts{cfg.noise_dim, cfg.generator_hidden, true};
  s.weak = make_augmentor(AugmentorKind::weak, ctx.skeleton, s.rng, cfg.weak_bounds, aug_opts);
  s.strong = make_augmentor(AugmentorKind::strong, ctx.skeleton, s.rng, cfg.strong_bounds, aug_opts);
  s.weak_opt = gan_optimizer(cfg.gen_lr, s.weak.params.size(), cfg);
  s.strong_opt = gan_optimizer(cfg.gen_lr, s.strong.params.size(), cfg);

  s.weak_critic = make_critic(CriticRole::weak, joints, s.rng, cfg.critic_hidden);
  s.strong_critic = make_critic(CriticRole::strong, joints, s.rng, cfg.critic_hidden);
  s.weak_critic_opt = gan_optimizer(cfg.disc_lr, s.weak_critic.params.size(), cfg);
  s.strong_critic_opt = gan_optimizer(cfg.disc_lr, s.strong_critic.params.size(), cfg);
  return s;
}

SourceBatch make_source_batch(const Dataset& ds, const std::vector<int>& rows) {
  const Matrix all_poses = joints_matrix(ds);
  const Matrix all_keypoints = keypoints_matrix(ds);
  const int root = human16().root();
  SourceBatch b;
  b.poses.resize(static_cast<Eigen::Index>(rows.size()), all_poses.cols());
  Matrix keypoints(static_cast<Eigen::Index>(rows.size()), all_keypoints.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.poses.row(static_cast<Eigen::Index>(i)) = all_poses.row(rows[i]);
    keypoints.row(static_cast<Eigen::Index>(i)) = all_keypoints.row(rows[i]);
  }
  b.lift.inputs = normalize_keypoints(keypoints, ds.camera);
  b.lift.targets = root_relative(b.poses, root);
  return b;
}

SourceBatch make_source_batch(const Dataset& ds) {
  std::vector<int> rows(ds.size());
  std::iota(rows.begin(), rows.end(), 0);
  return make_source_batch(ds, rows);
}

namespace {

SourceBatch take_rows(const SourceBatch& all, std::span<const int> rows) {
  SourceBatch b;
  b.poses.resize(static_cast<Eigen::Index>(rows.size()), all.poses.cols());
  b.lift.inputs.resize(b.poses.rows(), all.lift.inputs.cols());
  b.lift.targets.resize(b.poses.rows(), all.lift.targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    b.poses.row(r) = all.poses.row(rows[i]);
    b.lift.inputs.row(r) = all.lift.inputs.row(rows[i]);
    b.lift.targets.row(r) = all.lift.targets.row(rows[i]);
  }
  return b;
}

// Shuffled full batches; a trailing remainder is dropped unless it is the only batch.
std::vector<std::vector<int>> epoch_batches(Eigen::Index n, int batch_size, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with an explicit draw so the order does not depend on the standard library.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<int>> out;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start + bs <= order.size(); start += bs) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(start + bs));
  }
  if (out.empty() && !order.empty()) out.push_back(order);
  return out;
}

}  // namespace

std::vector<double> warmup(TrainState& state, const SourceBatch& source, const TrainConfig& cfg) {
  std::vector<double> losses{batch_mse(state.estimator, source.lift)};
  const BatchLoss loss = estimator_loss(state.estimator);
  for (int e = 0; e < cfg.warmup_epochs; ++e) {
    for (const auto& rows : epoch_batches(source.lift.size(), cfg.batch_size, state.rng)) {
      const SourceBatch b = take_rows(source, rows);
      supervised_step(state.estimator.params.values, state.estimator_opt, b.lift, loss);
    }
    losses.push_back(batch_mse(state.estimator, source.lift));
  }
  return losses;
}

// ---------------------------------------------------------------- steps

bool StepLog::finite() const {
  for (const auto& v : {weak_critic, strong_critic, weak_gen, strong_gen, weak_adv, strong_adv, weak_feedback,
                        strong_feedback, meta_train, meta_test, meta_combined, meta2_train, meta2_test,
                        meta2_combined}) {
    if (v && !std::isfinite(*v)) return false;
  }
  return true;
}

StepNoise StepNoise::draw(Eigen::Index rows, int dim, std::mt19937_64& rng) {
  StepNoise n;
  n.weak = draw_noise(rows, dim, rng);
  n.strong = draw_noise(rows, dim, rng);
  return n;
}

Var normalized_projection_graph(Tape& tape, Var poses, int joints, const Camera& camera) {
  std::vector<int> xs, ys, zs;
  for (int j = 0; j < joints; ++j) {
    xs.push_back(3 * j);
    ys.push_back(3 * j + 1);
    zs.push_back(3 * j + 2);
  }
  const Var depth = tape.add_scalar(tape.gather_cols(poses, zs), camera.subject_distance);
  const Var inv = tape.square(tape.unary(depth, UnaryFn::Rsqrt));
  const Var u = tape.mul(tape.gather_cols(poses, xs), inv);
  const Var v = tape.mul(tape.gather_cols(poses, ys), inv);
  std::vector<int> even, odd;
  for (int j = 0; j < joints; ++j) {
    even.push_back(2 * j);
    odd.push_back(2 * j + 1);
  }
  return tape.add(tape.scatter_cols(u, even, 2 * joints), tape.scatter_cols(v, odd, 2 * joints));
}

namespace {

double critic_update(CriticParams& critic, OptimizerState& opt, const Matrix& real, const Matrix& synth, double beta,
                     const TrainConfig& cfg, std::mt19937_64& rng) {
  Tape tape;
  const Var p = tape.constant(critic.params.values);
  const Var loss = critic_loss_graph(tape, critic, p, real, synth, beta, rng, cfg.gp_squared);
  const double value = tape.scalar(loss);
  const Matrix g = tape.grad(loss, p);
  optimizer_step(opt, critic.params.values, Eigen::Map<const Vector>(g.data(), g.size()));
  return value;
}

struct GeneratorTerms {
  double total = 0.0;
  double adv = 0.0;
  double feedback = 0.0;
};

GeneratorTerms generator_update(AugmentorParams& aug, OptimizerState& opt, const CriticParams& critic,
                                const EstimatorParams& est, const TrainContext& ctx, const Matrix& poses,
                                const Matrix& noise, double og_weight, const TrainConfig& cfg) {
  Tape tape;
  const Var p = tape.constant(aug.params.values);
  const StateVars states = augment_graph(tape, aug, p, ctx.ops, tape.constant(poses), tape.constant(noise));
  const Var sim = cfg.flags.diffgen ? gen_loss_graph(tape, ctx.ops, states, PairSets::standard(), og_weight)
                                    : sim_loss_graph(tape, ctx.ops, states.or_state, states.rt);
  const Var rel = root_relative_graph(tape, states.rt, ctx.ops.joints, ctx.ops.root);
  const Var adv = generator_adv_graph(tape, critic, rel);
  Var total = tape.add(sim, adv);
  GeneratorTerms terms;
  terms.adv = tape.scalar(adv);
  if (cfg.feedback_weight != 0.0) {
    const Var x = normalized_projection_graph(tape, states.rt, ctx.ops.joints, ctx.camera);
    const Var pred = estimate_graph(tape, est, tape.constant(est.params.values), x);
    const Var fb = tape.scale(mse(tape, pred, rel), -cfg.feedback_weight);
    terms.feedback = tape.scalar(fb);
    total = tape.add(total, fb);
  }
  terms.total = tape.scalar(total);
  const Matrix g = tape.grad(total, p);
  optimizer_step(opt, aug.params.values, Eigen::Map<const Vector>(g.data(), g.size()));
  return terms;
}

}  // namespace

void critic_phase(TrainState& state, const TrainContext& ctx, const Matrix& poses, const StepNoise& noise,
                  const TrainConfig& cfg, StepLog& log) {
  const bool use_weak = weak_active(cfg);
  const bool use_strong = strong_active(cfg);
  if (!use_weak && !use_strong) return;
  const int root = ctx.ops.root;
  const Matrix source_rel = root_relative(poses, root);
  Matrix weak_rel, strong_rel;
  if (use_weak || (use_strong && cfg.flags.diffdis)) {
    weak_rel = root_relative(augment_batch(poses, noise.weak, state.weak, ctx.skeleton).rt, root);
  }
  if (use_strong) strong_rel = root_relative(augment_batch(poses, noise.strong, state.strong, ctx.skeleton).rt, root);

  for (int i = 0; i < cfg.n_critic; ++i) {
    if (use_weak) {
      log.weak_critic = critic_update(state.weak_critic, state.weak_critic_opt, source_rel, weak_rel, cfg.beta1, cfg,
                                      state.rng);
    }
    if (use_strong) {
      // Without a weak augmentor (or without differential discrimination) the
      // strong critic compares against source poses.
      const bool against_weak = cfg.flags.diffdis && !cfg.flags.strong_only;
      log.strong_critic = critic_update(state.strong_critic, state.strong_critic_opt,
                                        against_weak ? weak_rel : source_rel, strong_rel, cfg.beta2, cfg, state.rng);
    }
  }
}

void generator_phase(TrainState& state, const TrainContext& ctx, const Matrix& poses, const StepNoise& noise,
                     const TrainConfig& cfg, StepLog& log) {
  if (weak_active(cfg)) {
    const GeneratorTerms t = generator_update(state.weak, state.weak_opt, state.weak_critic, state.estimator, ctx,
                                              poses, noise.weak, cfg.alpha1, cfg);
    log.weak_gen = t.total;
    log.weak_adv = t.adv;
    log.weak_feedback = t.feedback;
  }
  if (strong_active(cfg)) {
    const GeneratorTerms t = generator_update(state.strong, state.strong_opt, state.strong_critic, state.estimator,
                                              ctx, poses, noise.strong, -cfg.alpha2, cfg);
    log.strong_gen = t.total;
    log.strong_adv = t.adv;
    log.strong_feedback = t.feedback;
  }
}

void estimator_phase(TrainState& state, const TrainContext& ctx, const SourceBatch& batch, const TrainConfig& cfg,
                     StepLog& log) {
  if (cfg.source_only) {
    // Same number of estimator updates as the meta schedule, all on source data.
    const BatchLoss loss = estimator_loss(state.estimator);
    log.meta_train = supervised_step(state.estimator.params.values, state.estimator_opt, batch.lift, loss);
    log.meta2_train = supervised_step(state.estimator.params.values, state.estimator_opt, batch.lift, loss);
    return;
  }
  MetaRoundOptions options;
  options.plain_supervised = !cfg.flags.metaopt;
  if (cfg.flags.weak_only) options.plan = MetaPlan::weak_only;
  if (cfg.flags.strong_only) options.plan = MetaPlan::strong_only;
  const MetaRoundReport r = meta_round(state.estimator, state.estimator_opt, batch.lift, batch.poses, state.weak,
                                       state.strong, ctx.skeleton, ctx.camera, cfg.meta, state.rng, options);
  log.meta_train = r.first.train_loss;
  log.meta_combined = r.first.combined;
  if (cfg.flags.metaopt) log.meta_test = r.first.test_loss;
  if (r.has_second) {
    log.meta2_train = r.second.train_loss;
    log.meta2_combined = r.second.combined;
    if (cfg.flags.metaopt) log.meta2_test = r.second.test_loss;
  }
}

StepLog train_step(TrainState& state, const TrainContext& ctx, const SourceBatch& batch, const TrainConfig& cfg) {
  StepLog log;
  log.step = state.step;
  const StepNoise noise = StepNoise::draw(batch.poses.rows(), cfg.noise_dim, state.rng);
  critic_phase(state, ctx, batch.poses, noise, cfg, log);
  generator_phase(state, ctx, batch.poses, noise, cfg, log);
  estimator_phase(state, ctx, batch, cfg, log);
  ++state.step;
  return log;
}

// ---------------------------------------------------------------- runs

MetricSummary evaluate(const EstimatorParams& est, const Dataset& ds) {
  if (ds.size() == 0) throw EmptyBatchError("cannot evaluate on an empty dataset");
  const Matrix inputs = normalize_keypoints(keypoints_matrix(ds), ds.camera);
  const Matrix targets = root_relative(joints_matrix(ds), est.root);
  const Matrix preds = predict(est, inputs);
  std::vector<Pose3D> p, g;
  p.reserve(ds.size());
  g.reserve(ds.size());
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    p.push_back(unflatten3(preds.row(i)));
    g.push_back(unflatten3(targets.row(i)));
  }
  return summarize(ds.domain_name, p, g);
}

const MetricSummary* RunReport::find(const std::string& domain) const {
  for (const auto& m : eval) {
    if (m.domain == domain) return &m;
  }
  return nullptr;
}

namespace {

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string losses_header() {
  return "step,epoch,weak_critic,strong_critic,weak_gen,strong_gen,weak_adv,strong_adv,weak_feedback,"
         "strong_feedback,meta_train,meta_test,meta_combined,meta2_train,meta2_test,meta2_combined\n";
}

std::string losses_row(const StepLog& l) {
  std::string s = std::to_string(l.step) + "," + std::to_string(l.epoch);
  for (const auto& v : {l.weak_critic, l.strong_critic, l.weak_gen, l.strong_gen, l.weak_adv, l.strong_adv,
                        l.weak_feedback, l.strong_feedback, l.meta_train, l.meta_test, l.meta_combined,
                        l.meta2_train, l.meta2_test, l.meta2_combined}) {
    s += "," + opt_cell(v);
  }
  return s + "\n";
}

void write_json(const std::string& path, const json& doc) { write_text_file_atomic(path, doc.dump() + "\n"); }

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

RunReport run_training(const TrainConfig& cfg, const Dataset& source, const std::vector<Dataset>& evals,
                       const std::string& out_dir, const Skeleton& skeleton) {
  validate(cfg);
  if (source.size() == 0) throw EmptyBatchError("source dataset is empty");
  const auto t0 = std::chrono::steady_clock::now();
  const bool files = !out_dir.empty();
  if (files) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    write_text_file_atomic(join(out_dir, "config.json"), to_json(cfg).dump(2) + "\n");
  }

  const TrainContext ctx = TrainContext::make(skeleton, source.camera);
  TrainState state = make_train_state(cfg, ctx);
  const SourceBatch all = make_source_batch(source);
  std::vector<int> eval_rows(static_cast<std::size_t>(std::min<Eigen::Index>(cfg.eval_batch, all.lift.size())));
  std::iota(eval_rows.begin(), eval_rows.end(), 0);
  const SourceBatch eval_batch = take_rows(all, eval_rows);
  // Diagnostics draw from their own stream so that they never perturb training.
  std::mt19937_64 diag_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  RunReport report;
  std::string losses = losses_header();
  std::string epochs = "epoch,phase,source_mse,dg_weak_source,dg_weak_aug,dg_strong_source,dg_strong_aug\n";

  const int warm = std::min(cfg.warmup_epochs, cfg.epochs);
  TrainConfig warm_cfg = cfg;
  warm_cfg.warmup_epochs = 1;
  report.warmup_losses.push_back(batch_mse(state.estimator, all.lift));

  const auto finish_epoch = [&](int epoch, const char* phase) {
    const double src = batch_mse(state.estimator, all.lift);
    const auto dw = dg_objective_eval(eval_batch.lift, state.weak, state.estimator, ctx.camera, skeleton, diag_rng);
    const auto ds = dg_objective_eval(eval_batch.lift, state.strong, state.estimator, ctx.camera, skeleton, diag_rng);
    epochs += std::to_string(epoch) + "," + phase + "," + format_double(src) + "," + format_double(dw.first) + "," +
              format_double(dw.second) + "," + format_double(ds.first) + "," + format_double(ds.second) + "\n";
    if (!std::isfinite(src)) report.all_finite = false;
    const bool last = epoch == cfg.epochs;
    if (files && (last || (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0))) {
      write_json(join(out_dir, "estimator_epoch" + std::to_string(epoch) + ".json"), to_json(state.estimator));
    }
    return src;
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (epoch <= warm) {
      const std::vector<double> l = warmup(state, all, warm_cfg);
      (void)l;
      report.warmup_losses.push_back(finish_epoch(epoch, "warmup"));
      continue;
    }
    for (const auto& rows : epoch_batches(all.lift.size(), cfg.batch_size, state.rng)) {
      const SourceBatch batch = take_rows(all, rows);
      StepLog log = train_step(state, ctx, batch, cfg);
      log.epoch = epoch;
      if (!log.finite()) report.all_finite = false;
      losses += losses_row(log);
    }
    finish_epoch(epoch, "train");
  }
  report.steps = state.step;

  for (const Dataset& ds : evals) report.eval.push_back(evaluate(state.estimator, ds));

  if (files) {
    write_text_file_atomic(join(out_dir, "losses.csv"), losses);
    write_text_file_atomic(join(out_dir, "epochs.csv"), epochs);
    if (cfg.epochs == 0) write_json(join(out_dir, "estimator_epoch0.json"), to_json(state.estimator));
    write_json(join(out_dir, "augmentor_weak.json"), to_json(state.weak));
    write_json(join(out_dir, "augmentor_strong.json"), to_json(state.strong));
    write_json(join(out_dir, "critic_weak.json"), to_json(state.weak_critic));
    write_json(join(out_dir, "critic_strong.json"), to_json(state.strong_critic));
    std::string eval = metrics_csv_header() + "\n";
    for (const auto& m : report.eval) eval += metrics_csv_row(m) + "\n";
    write_text_file_atomic(join(out_dir, "eval.csv"), eval);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// ---------------------------------------------------------------- experiments

const AggregateRow* ExperimentReport::find(const std::string& variant, const std::string& domain) const {
  for (const auto& r : rows) {
    if (r.variant == variant && r.domain == domain) return &r;
  }
  return nullptr;
}

int worker_threads() {
  if (const char* env = std::getenv("DUALAUG_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  // Sample standard deviation; zero for a single seed.
  const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
  return {mean, sd};
}

}  // namespace

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::string out = "variant,domain,mpjpe_mean,mpjpe_std,pa_mpjpe_mean,pa_mpjpe_std,pck150_mean,auc_mean,seeds\n";
  for (const auto& r : rows) {
    out += r.variant + "," + r.domain + "," + format_double(r.mpjpe_mean) + "," + format_double(r.mpjpe_std) + "," +
           format_double(r.pa_mpjpe_mean) + "," + format_double(r.pa_mpjpe_std) + "," + format_double(r.pck150_mean) +
           "," + format_double(r.auc_mean) + "," + std::to_string(r.seeds) + "\n";
  }
  return out;
}

ExperimentReport run_experiment(const TrainConfig& base, const std::vector<std::string>& variants,
                                const std::vector<std::uint64_t>& seeds, const Dataset& source,
                                const std::vector<Dataset>& evals, const std::string& out_dir, int threads,
                                const Skeleton& skeleton) {
  if (variants.empty() || seeds.empty()) throw ShapeError("experiment needs at least one variant and one seed");
  std::vector<TrainConfig> configs;
  for (const auto& v : variants) configs.push_back(apply_ablation(base, v));

  ExperimentReport report;
  report.variants = variants;
  report.seeds = seeds;
  report.runs.assign(variants.size(), std::vector<RunReport>(seeds.size()));

  const std::size_t jobs = variants.size() * seeds.size();
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const std::size_t v = j / seeds.size();
      const std::size_t s = j % seeds.size();
      try {
        TrainConfig cfg = configs[v];
        cfg.seed = seeds[s];
        const std::string dir =
            out_dir.empty() ? std::string() : join(join(out_dir, variants[v]), "seed_" + std::to_string(seeds[s]));
        report.runs[v][s] = run_training(cfg, source, evals, dir, skeleton);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(jobs)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (const Dataset& ds : evals) {
      std::vector<double> mp, pa, pck, au;
      for (const RunReport& r : report.runs[v]) {
        const MetricSummary* m = r.find(ds.domain_name);
        mp.push_back(m->mpjpe);
        pa.push_back(m->pa_mpjpe);
        pck.push_back(m->pck150);
        au.push_back(m->auc);
      }
      AggregateRow row;
      row.variant = variants[v];
      row.domain = ds.domain_name;
      std::tie(row.mpjpe_mean, row.mpjpe_std) = mean_std(mp);
      std::tie(row.pa_mpjpe_mean, row.pa_mpjpe_std) = mean_std(pa);
      row.pck150_mean = mean_std(pck).first;
      row.auc_mean = mean_std(au).first;
      row.seeds = static_cast<int>(seeds.size());
      report.rows.push_back(row);
    }
  }
  if (!out_dir.empty()) write_text_file_atomic(join(out_dir, "summary.csv"), aggregate_csv(report.rows));
  return report;
}

}  // namespace dualaug
