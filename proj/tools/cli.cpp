#include "cli.hpp"

#include "dualaug/augmentor.hpp"
#include "dualaug/checkpoint.hpp"
#include "dualaug/data.hpp"
#include "dualaug/errors.hpp"
#include "dualaug/estimator.hpp"
#include "dualaug/io.hpp"
#include "dualaug/meta.hpp"
#include "dualaug/metrics.hpp"
#include "dualaug/plot.hpp"
#include "dualaug/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace dualaug::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSynopsis =
    "usage: dualaug <command> [options]\n"
    "commands:\n"
    "  gen-data --spec default|FILE --out DIR [--seed N]\n"
    "  train    --config desk|paper|FILE --data DIR --out DIR [--seed N] [--ablate diffgen|diffdis|metaopt|wa|sa]\n"
    "           [--skeleton FILE]\n"
    "  augment  --checkpoint FILE|DIR --mode weak|strong --in FILE --out FILE [--seed N] [--skeleton FILE]\n"
    "  eval     --checkpoint FILE --data FILE [--camera FILE] [--out FILE]\n"
    "  ablate   --config desk|paper|FILE --data DIR --out DIR [--seeds 0,1,2] [--variants a,b,...] [--threads N]\n"
    "  plot     --csv FILE --out FILE\n";

TrainConfig config_from_arg(const std::string& arg) {
  if (arg == "desk" || arg == "default") return TrainConfig{};
  if (arg == "paper") {
    TrainConfig cfg;
    cfg.batch_size = 1024;
    cfg.epochs = 60;
    return cfg;
  }
  return load_train_config(arg);
}

std::vector<DomainSpec> specs_from_arg(const std::string& arg) {
  if (arg == "default") return default_domain_specs();
  return load_domain_specs(arg);
}

Skeleton skeleton_from_arg(const std::string& path) { return path.empty() ? human16() : load_skeleton(path); }

Dataset load_domain(const std::string& dir, const std::string& name) {
  return load_dataset((fs::path(dir) / (name + ".jsonl")).string());
}

// Every *.jsonl in the directory except the source, in name order, after the source itself.
std::vector<Dataset> eval_sets(const std::string& dir, const Dataset& source) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".jsonl" && entry.path().stem() != "source") {
      names.push_back(entry.path().stem().string());
    }
  }
  std::sort(names.begin(), names.end());
  std::vector<Dataset> out{source};
  for (const auto& n : names) out.push_back(load_domain(dir, n));
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int gen_data(const std::string& spec_arg, const std::string& out_dir, std::uint64_t seed, const std::string& camera_arg,
             std::ostream& out) {
  const Camera camera = camera_arg.empty() ? Camera{} : load_camera(camera_arg);
  for (DomainSpec spec : specs_from_arg(spec_arg)) {
    spec.seed += seed * 1000003ULL;
    const Dataset ds = generate_dataset(spec, camera);
    const std::string path = (fs::path(out_dir) / (spec.name + ".jsonl")).string();
    save_dataset(ds, path);
    out << path << " " << ds.size() << "\n";
  }
  return 0;
}

int train(const std::string& config_arg, const std::string& data_dir, const std::string& out_dir,
          std::optional<std::uint64_t> seed, const std::string& ablation, const Skeleton& skeleton, std::ostream& out) {
  TrainConfig cfg = config_from_arg(config_arg);
  if (seed) cfg.seed = *seed;
  if (!ablation.empty()) cfg = apply_ablation(cfg, ablation);
  const Dataset source = load_domain(data_dir, "source");
  const RunReport r = run_training(cfg, source, eval_sets(data_dir, source), out_dir, skeleton);
  out << metrics_csv_header() << "\n";
  for (const auto& m : r.eval) out << metrics_csv_row(m) << "\n";
  return r.all_finite ? 0 : 1;
}

std::string rows_json(const Eigen::Ref<const Eigen::RowVectorXd>& flat) {
  std::string s = "[";
  for (Eigen::Index j = 0; j < flat.size() / 3; ++j) {
    s += j ? ",[" : "[";
    for (int c = 0; c < 3; ++c) s += (c ? "," : "") + format_double(flat(3 * j + c));
    s += "]";
  }
  return s + "]";
}

// A run directory resolves to its augmentor_<mode>.json.
AugmentorParams load_augmentor(const std::string& path, AugmentorKind mode) {
  const fs::path p = fs::is_directory(path) ? fs::path(path) / ("augmentor_" + to_string(mode) + ".json") : fs::path(path);
  AugmentorParams aug = augmentor_from_json(parse_json_file(p.string()));
  if (aug.kind != mode) {
    throw ShapeError(p.string() + " holds a " + to_string(aug.kind) + " augmentor, not " + to_string(mode));
  }
  return aug;
}

int augment_cmd(const std::string& ckpt, const std::string& mode, const std::string& in_path,
                const std::string& out_path, std::uint64_t seed, const Skeleton& skeleton, std::ostream& out) {
  const AugmentorParams aug = load_augmentor(ckpt, augmentor_kind_from_string(mode));
  const Dataset ds = load_dataset(in_path);
  std::mt19937_64 rng(seed);
  const Matrix noise = draw_noise(static_cast<Eigen::Index>(ds.size()), aug.noise_dim, rng);
  const BatchStates states = augment_batch(joints_matrix(ds), noise, aug, skeleton);
  std::string text;
  for (Eigen::Index i = 0; i < states.rt.rows(); ++i) {
    text += "{\"id\":" + std::to_string(i) + ",\"mode\":\"" + mode + "\",\"or\":" + rows_json(states.or_state.row(i)) +
            ",\"ba\":" + rows_json(states.ba.row(i)) + ",\"bl\":" + rows_json(states.bl.row(i)) +
            ",\"rt\":" + rows_json(states.rt.row(i)) + "}\n";
  }
  write_text_file_atomic(out_path, text);
  out << out_path << " " << states.rt.rows() << "\n";
  return 0;
}

int eval_cmd(const std::string& ckpt, const std::string& data_path, const std::string& camera_path,
             const std::string& out_path, std::ostream& out) {
  const EstimatorParams est = estimator_from_json(parse_json_file(ckpt));
  const Dataset ds = load_dataset(data_path, camera_path);
  const std::string csv = metrics_csv_header() + "\n" + metrics_csv_row(evaluate(est, ds)) + "\n";
  if (!out_path.empty()) write_text_file_atomic(out_path, csv);
  out << csv;
  return 0;
}

int ablate(const std::string& config_arg, const std::string& data_dir, const std::string& out_dir,
           const std::string& seeds_arg, const std::string& variants_arg, int threads, std::ostream& out) {
  const TrainConfig cfg = config_from_arg(config_arg);
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(seeds_arg)) seeds.push_back(std::stoull(s));
  std::vector<std::string> variants = split_list(variants_arg);
  if (variants.empty()) variants = {"full", "diffgen", "diffdis", "metaopt", "wa", "sa", "source_only"};
  const Dataset source = load_domain(data_dir, "source");
  const ExperimentReport r = run_experiment(cfg, variants, seeds, source, eval_sets(data_dir, source), out_dir,
                                            threads > 0 ? threads : worker_threads());
  out << aggregate_csv(r.rows);
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dualaug: dual-augmentor pose lifting toolkit", "dualaug"};
  app.require_subcommand(1);

  std::string spec_arg = "default", out_dir, camera_arg;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-data", "generate source and target domain datasets");
  gen->add_option("--spec", spec_arg, "domain spec JSON, or 'default'");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "seed offset");
  gen->add_option("--camera", camera_arg, "camera JSON (default camera otherwise)");

  std::string config_arg = "desk", data_dir, ablation, skeleton_path;
  std::optional<std::uint64_t> train_seed;
  auto* tr = app.add_subcommand("train", "train an estimator with the dual-augmentor schedule");
  tr->add_option("--config", config_arg, "train config JSON, or 'desk' / 'paper'");
  tr->add_option("--data", data_dir, "dataset directory (source.jsonl, targets, camera.json)")->required();
  tr->add_option("--out", out_dir, "run directory")->required();
  tr->add_option("--seed", train_seed, "seed (overrides the config)");
  tr->add_option("--ablate", ablation, "disable one component")
      ->check(CLI::IsMember({"diffgen", "diffdis", "metaopt", "wa", "sa", "source_only"}));
  tr->add_option("--skeleton", skeleton_path, "skeleton JSON (16-joint model otherwise)");

  std::string data_path, out_path, mode = "strong", in_path, ckpt;
  auto* au = app.add_subcommand("augment", "write the four pose states of an augmentor for each input pose");
  au->add_option("--checkpoint", ckpt, "augmentor JSON, or a run directory")->required();
  au->add_option("--mode", mode, "which augmentor")->required()->check(CLI::IsMember({"weak", "strong"}));
  au->add_option("--in", in_path, "input poses JSONL")->required();
  au->add_option("--out", out_path, "output states JSONL")->required();
  au->add_option("--seed", seed, "noise seed");
  au->add_option("--skeleton", skeleton_path, "skeleton JSON (16-joint model otherwise)");

  auto* ev = app.add_subcommand("eval", "evaluate an estimator checkpoint");
  ev->add_option("--checkpoint", ckpt, "estimator JSON")->required();
  ev->add_option("--data", data_path, "dataset JSONL")->required();
  ev->add_option("--camera", camera_arg, "camera JSON (sibling camera.json otherwise)");
  ev->add_option("--out", out_path, "CSV output path");

  std::string seeds_arg = "0,1,2", variants_arg;
  int threads = 0;
  auto* ab = app.add_subcommand("ablate", "run the ablation table over seeds");
  ab->add_option("--config", config_arg, "train config JSON, or 'desk' / 'paper'");
  ab->add_option("--data", data_dir, "dataset directory")->required();
  ab->add_option("--out", out_dir, "output directory")->required();
  ab->add_option("--seeds", seeds_arg, "comma-separated seeds");
  ab->add_option("--variants", variants_arg, "comma-separated variants");
  ab->add_option("--threads", threads, "parallel runs (DUALAUG_THREADS otherwise)");

  std::string csv_path;
  auto* pl = app.add_subcommand("plot", "render a CSV as SVG");
  pl->add_option("--csv", csv_path, "input CSV")->required();
  pl->add_option("--out", out_path, "output SVG")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "dualaug: " << e.what() << "\n" << kSynopsis;
    return 2;
  }

  try {
    if (*gen) return gen_data(spec_arg, out_dir, seed, camera_arg, out);
    if (*tr) return train(config_arg, data_dir, out_dir, train_seed, ablation, skeleton_from_arg(skeleton_path), out);
    if (*au) return augment_cmd(ckpt, mode, in_path, out_path, seed, skeleton_from_arg(skeleton_path), out);
    if (*ev) return eval_cmd(ckpt, data_path, camera_arg, out_path, out);
    if (*ab) return ablate(config_arg, data_dir, out_dir, seeds_arg, variants_arg, threads, out);
    if (*pl) {
      plot_csv(csv_path, out_path);
      out << out_path << "\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "dualaug: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "dualaug: " << e.what() << "\n";
    return 1;
  }
  err << kSynopsis;
  return 2;
}

}  // namespace dualaug::cli
