#pragma once

#include "dualaug/augmentor.hpp"
#include "dualaug/critic.hpp"
#include "dualaug/data.hpp"
#include "dualaug/estimator.hpp"
#include "dualaug/meta.hpp"
#include "dualaug/metrics.hpp"
#include "dualaug/optimizer.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dualaug {

// true = component enabled. Ablations switch one of them.
struct AblationFlags {
  bool diffgen = true;       // PP/OG differential generation losses
  bool diffdis = true;       // strong critic compares strong against weak
  bool metaopt = true;       // meta_round instead of two supervised steps
  bool weak_only = false;    // single weak augmentor
  bool strong_only = false;  // single strong augmentor
};

struct TrainConfig {
  double alpha1 = 0.50;
  double alpha2 = 0.35;
  double beta1 = 4.0;
  double beta2 = 4.0;
  double gen_lr = 1e-4;
  double disc_lr = 2e-4;
  MetaConfig meta;
  int batch_size = 256;
  int epochs = 30;  // includes the warm-up epochs
  int warmup_epochs = 2;
  double feedback_weight = 0.1;
  int n_critic = 1;
  std::uint64_t seed = 0;
  AblationFlags flags;
  bool source_only = false;  // plain supervised training, no augmentors

  double weight_decay = 0.01;  // estimator AdamW
  double gan_beta1 = 0.5;
  double gan_beta2 = 0.9;
  bool gp_squared = true;
  int noise_dim = 16;
  std::vector<int> generator_hidden = {64, 64};
  std::vector<int> critic_hidden = {128, 128};
  int estimator_width = 256;
  int estimator_blocks = 2;
  AugmentorBounds weak_bounds = AugmentorBounds::weak_defaults();
  AugmentorBounds strong_bounds = AugmentorBounds::strong_defaults();
  int checkpoint_every = 1;  // epochs; 0 writes the final estimator only
  int eval_batch = 512;      // source rows used for the per-epoch diagnostics
};

void validate(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
// Flat object; keys missing from the document keep their defaults, unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& doc);
TrainConfig load_train_config(const std::string& path);

// Names: full, diffgen, diffdis, metaopt, wa, sa, source_only.
TrainConfig apply_ablation(TrainConfig cfg, const std::string& name);
const std::vector<std::string>& ablation_names();

// Immutable per-run context.
struct TrainContext {
  Skeleton skeleton;
  SkeletonOperators ops;
  Camera camera;

  static TrainContext make(const Skeleton& skeleton, const Camera& camera);
};

struct TrainState {
  EstimatorParams estimator;
  OptimizerState estimator_opt;
  AugmentorParams weak;
  AugmentorParams strong;
  OptimizerState weak_opt;
  OptimizerState strong_opt;
  CriticParams weak_critic;
  CriticParams strong_critic;
  OptimizerState weak_critic_opt;
  OptimizerState strong_critic_opt;
  std::mt19937_64 rng;
  long step = 0;
};

TrainState make_train_state(const TrainConfig& cfg, const TrainContext& ctx);

// Source poses in the camera frame plus their lifting batch.
struct SourceBatch {
  Matrix poses;
  LiftBatch lift;
};

SourceBatch make_source_batch(const Dataset& ds, const std::vector<int>& rows);
SourceBatch make_source_batch(const Dataset& ds);

// Supervised source-only epochs. Returns the full-source MSE before the
// first epoch and after each one.
std::vector<double> warmup(TrainState& state, const SourceBatch& source, const TrainConfig& cfg);

struct StepLog {
  long step = 0;
  int epoch = 0;
  std::optional<double> weak_critic;
  std::optional<double> strong_critic;
  std::optional<double> weak_gen;
  std::optional<double> strong_gen;
  std::optional<double> weak_adv;
  std::optional<double> strong_adv;
  std::optional<double> weak_feedback;
  std::optional<double> strong_feedback;
  std::optional<double> meta_train;
  std::optional<double> meta_test;
  std::optional<double> meta_combined;
  std::optional<double> meta2_train;
  std::optional<double> meta2_test;
  std::optional<double> meta2_combined;

  bool finite() const;
};

// Noise shared by the critic and generator phases of one step.
struct StepNoise {
  Matrix weak;
  Matrix strong;

  static StepNoise draw(Eigen::Index rows, int dim, std::mt19937_64& rng);
};

// The three phases of a step; each touches only its own parameters.
void critic_phase(TrainState& state, const TrainContext& ctx, const Matrix& poses, const StepNoise& noise,
                  const TrainConfig& cfg, StepLog& log);
void generator_phase(TrainState& state, const TrainContext& ctx, const Matrix& poses, const StepNoise& noise,
                     const TrainConfig& cfg, StepLog& log);
void estimator_phase(TrainState& state, const TrainContext& ctx, const SourceBatch& batch, const TrainConfig& cfg,
                     StepLog& log);

StepLog train_step(TrainState& state, const TrainContext& ctx, const SourceBatch& batch, const TrainConfig& cfg);

// Differentiable normalised projection of row-flattened camera-frame poses.
Var normalized_projection_graph(Tape& tape, Var poses, int joints, const Camera& camera);

MetricSummary evaluate(const EstimatorParams& est, const Dataset& ds);

struct RunReport {
  std::vector<MetricSummary> eval;  // one per evaluated dataset
  std::vector<double> warmup_losses;
  bool all_finite = true;
  long steps = 0;
  double seconds = 0.0;

  const MetricSummary* find(const std::string& domain) const;
};

// Full schedule for cfg.seed. `out_dir` may be empty to skip all files.
RunReport run_training(const TrainConfig& cfg, const Dataset& source, const std::vector<Dataset>& evals,
                       const std::string& out_dir, const Skeleton& skeleton = human16());

struct AggregateRow {
  std::string variant;
  std::string domain;
  double mpjpe_mean = 0.0;
  double mpjpe_std = 0.0;
  double pa_mpjpe_mean = 0.0;
  double pa_mpjpe_std = 0.0;
  double pck150_mean = 0.0;
  double auc_mean = 0.0;
  int seeds = 0;
};

struct ExperimentReport {
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<RunReport>> runs;  // [variant][seed]
  std::vector<AggregateRow> rows;

  const AggregateRow* find(const std::string& variant, const std::string& domain) const;
};

// Runs every (variant, seed) pair, `threads` at a time, each in
// out_dir/<variant>/seed_<n>, and writes out_dir/summary.csv.
ExperimentReport run_experiment(const TrainConfig& base, const std::vector<std::string>& variants,
                                const std::vector<std::uint64_t>& seeds, const Dataset& source,
                                const std::vector<Dataset>& evals, const std::string& out_dir, int threads,
                                const Skeleton& skeleton = human16());

std::string aggregate_csv(const std::vector<AggregateRow>& rows);

// DUALAUG_THREADS if set, else the hardware concurrency.
int worker_threads();

}  // namespace dualaug
