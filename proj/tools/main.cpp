#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tta/base_detector.hpp"
#include "tta/engine.hpp"
#include "tta/error.hpp"
#include "tta/stream_io.hpp"
#include "tta/synthetic.hpp"

#ifndef TTAKIT_VERSION
#define TTAKIT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// 17 significant digits: enough for doubles to survive a text round trip,
// and stable across identical reruns.
std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json opt_metric(const std::optional<double>& m) {
  if (!m) return nullptr;
  return *m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw tta::IoError("cannot open for writing: " + path.string());
  out << text;
  out.flush();
  if (!out) throw tta::IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

json config_json(const tta::StrategyConfig& cfg) {
  return json{
      {"strategy", tta::to_string(cfg.strategy)},
      {"n_m", cfg.memory_capacity},
      {"n_t", cfg.n_layers},
      {"d_t", cfg.transform_dim},
      {"n_f", cfg.n_neighbors},
      {"conf", cfg.conf},
      {"alpha", cfg.alpha},
      {"lr", cfg.lr},
      {"k_s", cfg.k_steps},
      {"batch", cfg.batch_size},
      {"seed", cfg.seed},
      {"lcpc_training", cfg.enable_lcpc_training},
      {"nfc", cfg.enable_nfc},
      {"predict_after_update", cfg.predict_after_update},
      {"grad_through_neighbors", cfg.nfc_grad_through_neighbors},
      {"reset_adam_per_batch", cfg.reset_optimizer_per_batch},
      {"identity_transform", cfg.identity_transform},
  };
}

json synth_json(const tta::SynthConfig& cfg) {
  return json{
      {"d", cfg.d},
      {"n_source", cfg.n_source},
      {"n_target", cfg.n_target},
      {"real_mean", cfg.real_mean},
      {"fake_mean_a", cfg.fake_mean_a},
      {"fake_mean_b", cfg.fake_mean_b},
      {"novel_mean", cfg.novel_mean},
      {"shift", cfg.shift},
      {"real_scale", cfg.real_scale},
      {"fake_scale", cfg.fake_scale},
      {"novel_scale", cfg.novel_scale},
      {"fake_fraction", cfg.fake_fraction},
      {"novel_weight", cfg.novel_weight},
      {"seed", cfg.seed},
  };
}

struct RunFlags {
  std::string stream_path;
  std::string weights_path;
  std::string strategy = "ours";
  std::string out_dir = ".";
  tta::StrategyConfig cfg;
  bool no_lcpc_train = false;
  bool no_nfc = false;
};

void add_strategy_options(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--n-m", f.cfg.memory_capacity, "memory bank capacity")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--n-t", f.cfg.n_layers, "transform layer count")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--d-t", f.cfg.transform_dim,
                  "transform output dim (0 = half the feature dim)");
  cmd->add_option("--n-f", f.cfg.n_neighbors, "neighbors per calibration");
  cmd->add_option("--conf", f.cfg.conf, "confidence filter threshold")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--alpha", f.cfg.alpha, "consistency loss weight")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--lr", f.cfg.lr, "Adam learning rate")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--k-s", f.cfg.k_steps, "update steps per batch")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--batch", f.cfg.batch_size, "batch size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.cfg.seed, "RNG seed")->envname("TTA_SEED");
  cmd->add_flag("--no-lcpc-train", f.no_lcpc_train, "disable ensemble training");
  cmd->add_flag("--no-nfc", f.no_nfc, "disable neighbor calibration");
  cmd->add_flag("--predict-after-update", f.cfg.predict_after_update,
                "score with post-update parameters");
  cmd->add_flag("--grad-through-neighbors", f.cfg.nfc_grad_through_neighbors,
                "backprop through neighbor predictions");
  cmd->add_flag("--reset-adam-per-batch", f.cfg.reset_optimizer_per_batch,
                "reset optimizer state every batch");
  cmd->add_flag("--identity-transform", f.cfg.identity_transform,
                "single identity layer instead of a random ensemble");
}

void check_stream_header(const tta::StreamHeader& h,
                         const tta::ClassifierFile& clf) {
  if (clf.weights.cols != h.d || clf.weights.rows != h.c)
    throw tta::ConfigError("stream and weights disagree on dimensions");
  if (clf.positive_class != h.positive_class)
    throw tta::ConfigError("stream and weights disagree on the positive class");
}

tta::StreamData load_checked_stream(const std::string& stream_path,
                                    const tta::ClassifierFile& clf) {
  tta::StreamData data = tta::load_stream(stream_path);
  check_stream_header(data.header, clf);
  return data;
}

// ---- synth ----------------------------------------------------------------

struct SynthFlags {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t d = 16;
  std::size_t n_source = 4000;
  std::size_t n_target = 2000;
  double shift = -1.0;         // <0: keep the frozen default magnitude
  double novel_weight = -1.0;  // <0: keep the frozen default
  std::size_t epochs = 300;
  double lr = 0.1;
};

int cmd_synth(const SynthFlags& f) {
  tta::SynthConfig cfg = tta::SynthConfig::benchmark_default(f.seed, f.d);
  cfg.n_source = f.n_source;
  cfg.n_target = f.n_target;
  if (f.novel_weight >= 0.0) cfg.novel_weight = f.novel_weight;
  if (f.shift >= 0.0) cfg.set_shift_magnitude(f.shift);

  tta::SynthStreams streams = tta::generate_synthetic(cfg);
  tta::BaseTrainResult trained = tta::train_base_detector(
      streams.source.records, 2, f.epochs, f.lr, cfg.seed);
  trained.detector.annotate(streams.source.records);
  trained.detector.annotate(streams.target.records);

  fs::create_directories(f.out_dir);
  const fs::path dir(f.out_dir);
  tta::write_stream((dir / "source.fts").string(), streams.source.header,
                    streams.source.records);
  tta::write_stream((dir / "target.fts").string(), streams.target.header,
                    streams.target.records);
  tta::write_weights((dir / "weights.ftw").string(), trained.detector.weights,
                     trained.detector.positive_class);

  json manifest{
      {"tool", "ttakit"},
      {"version", TTAKIT_VERSION},
      {"command", "synth"},
      {"synth_config", synth_json(cfg)},
      {"detector", json{{"epochs", f.epochs},
                        {"lr", f.lr},
                        {"train_accuracy", trained.train_accuracy},
                        {"final_loss", trained.final_loss}}},
      {"outputs", json{{"source", (dir / "source.fts").string()},
                       {"target", (dir / "target.fts").string()},
                       {"weights", (dir / "weights.ftw").string()}}},
  };
  write_json(dir / "synth_manifest.json", manifest);
  std::cout << json{{"command", "synth"},
                    {"source_records", streams.source.records.size()},
                    {"target_records", streams.target.records.size()},
                    {"train_accuracy", trained.train_accuracy}}
                   .dump()
            << "\n";
  return 0;
}

// ---- train-base -----------------------------------------------------------

struct TrainBaseFlags {
  std::string source_path;
  std::string out_path;
  std::size_t epochs = 300;
  double lr = 0.1;
  std::uint64_t seed = 0;
};

int cmd_train_base(const TrainBaseFlags& f) {
  const tta::StreamData source = tta::load_stream(f.source_path);
  const tta::BaseTrainResult trained = tta::train_base_detector(
      source.records, source.header.c, f.epochs, f.lr, f.seed);
  if (const fs::path parent = fs::path(f.out_path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  tta::write_weights(f.out_path, trained.detector.weights,
                     source.header.positive_class);
  json manifest{
      {"tool", "ttakit"},
      {"version", TTAKIT_VERSION},
      {"command", "train-base"},
      {"inputs", json{{"source", f.source_path}}},
      {"outputs", json{{"weights", f.out_path}}},
      {"epochs", f.epochs},
      {"lr", f.lr},
      {"seed", f.seed},
      {"train_accuracy", trained.train_accuracy},
      {"final_loss", trained.final_loss},
  };
  write_json(f.out_path + ".manifest.json", manifest);
  std::cout << json{{"command", "train-base"},
                    {"train_accuracy", trained.train_accuracy},
                    {"final_loss", trained.final_loss}}
                   .dump()
            << "\n";
  return 0;
}

// ---- run --------------------------------------------------------------------

int cmd_run(RunFlags& f) {
  f.cfg.strategy = tta::strategy_from_string(f.strategy);
  if (f.no_lcpc_train) f.cfg.enable_lcpc_training = false;
  if (f.no_nfc) f.cfg.enable_nfc = false;

  const tta::ClassifierFile clf = tta::read_weights(f.weights_path);

  // binary streams are consumed in one sequential pass; CSV fixtures are
  // small and simply loaded
  std::unique_ptr<tta::RecordSource> source;
  std::uint32_t positive_class = 0;
  if (f.stream_path.size() >= 4 &&
      f.stream_path.substr(f.stream_path.size() - 4) == ".csv") {
    tta::StreamData data = load_checked_stream(f.stream_path, clf);
    positive_class = data.header.positive_class;
    source = std::make_unique<tta::VectorSource>(std::move(data.records));
  } else {
    auto reader = std::make_unique<tta::StreamReader>(f.stream_path);
    check_stream_header(reader->header(), clf);
    positive_class = reader->header().positive_class;
    source = std::move(reader);
  }

  const tta::EvaluationReport rep =
      tta::run_stream(f.cfg, clf.weights, *source, positive_class);

  fs::create_directories(f.out_dir);
  const fs::path dir(f.out_dir);

  std::string scores_text;
  scores_text.reserve(rep.per_sample_scores.size() * 24);
  for (const auto& [idx, score] : rep.per_sample_scores)
    scores_text += std::to_string(idx) + " " + g17(score) + "\n";
  write_text(dir / "scores.txt", scores_text);

  json summary{
      {"command", "run"},
      {"strategy", rep.strategy},
      {"n_samples", rep.per_sample_scores.size()},
      {"auc", opt_metric(rep.auc)},
      {"acc", opt_metric(rep.acc)},
      {"eer", opt_metric(rep.eer)},
      {"seconds_per_batch", rep.seconds_per_batch},
  };
  write_json(dir / "summary.json", summary);

  json manifest{
      {"tool", "ttakit"},
      {"version", TTAKIT_VERSION},
      {"command", "run"},
      {"inputs", json{{"stream", f.stream_path}, {"weights", f.weights_path}}},
      {"outputs", json{{"scores", (dir / "scores.txt").string()},
                       {"summary", (dir / "summary.json").string()}}},
      {"config", config_json(f.cfg)},
      {"positive_class", positive_class},
      {"timing", json{{"seconds_per_batch", rep.seconds_per_batch}}},
  };
  write_json(dir / "run_manifest.json", manifest);

  std::cout << summary.dump() << "\n";
  return 0;
}

// ---- ablate -----------------------------------------------------------------

struct AblateVariant {
  int id;
  const char* label;
  bool lcpc;
  bool nfc;
};

tta::StrategyConfig variant_config(const tta::StrategyConfig& base,
                                   const AblateVariant& v, std::uint64_t seed) {
  tta::StrategyConfig cfg = base;
  cfg.seed = seed;
  if (!v.lcpc && !v.nfc) {
    cfg.strategy = tta::Strategy::no_adapt;
    return cfg;
  }
  cfg.strategy = tta::Strategy::ours;
  cfg.enable_lcpc_training = v.lcpc;
  cfg.identity_transform = !v.lcpc;
  cfg.enable_nfc = v.nfc;
  return cfg;
}

int cmd_ablate(RunFlags& f, std::size_t repeats) {
  const tta::ClassifierFile clf = tta::read_weights(f.weights_path);
  const tta::StreamData data = load_checked_stream(f.stream_path, clf);

  const AblateVariant variants[] = {
      {1, "baseline", false, false},
      {2, "lcpc_only", true, false},
      {3, "nfc_only", false, true},
      {4, "full", true, true},
  };

  json rows = json::array();
  std::printf("%-3s %-5s %-4s %-10s %9s %9s\n", "ID", "LCPC", "NFC", "variant",
              "mean_auc", "std_auc");
  for (const AblateVariant& v : variants) {
    std::vector<double> aucs;
    for (std::size_t r = 0; r < repeats; ++r) {
      const tta::StrategyConfig cfg = variant_config(f.cfg, v, f.cfg.seed + r);
      tta::VectorSource source(data.records);
      const tta::EvaluationReport rep =
          tta::run_stream(cfg, clf.weights, source, data.header.positive_class);
      if (!rep.auc)
        throw tta::MetricError("ablate: stream has no usable labels");
      aucs.push_back(*rep.auc);
    }
    double mean = 0.0;
    for (double a : aucs) mean += a;
    mean /= double(aucs.size());
    double var = 0.0;
    for (double a : aucs) var += (a - mean) * (a - mean);
    const double stddev = aucs.size() > 1 ? std::sqrt(var / double(aucs.size() - 1)) : 0.0;

    std::printf("%-3d %-5s %-4s %-10s %9.4f %9.4f\n", v.id, v.lcpc ? "yes" : "no",
                v.nfc ? "yes" : "no", v.label, mean, stddev);
    rows.push_back(json{{"id", v.id},
                        {"label", v.label},
                        {"lcpc", v.lcpc},
                        {"nfc", v.nfc},
                        {"mean_auc", mean},
                        {"std_auc", stddev},
                        {"per_seed_auc", aucs}});
  }

  fs::create_directories(f.out_dir);
  const fs::path dir(f.out_dir);
  write_json(dir / "ablate.json", rows);
  json manifest{
      {"tool", "ttakit"},
      {"version", TTAKIT_VERSION},
      {"command", "ablate"},
      {"inputs", json{{"stream", f.stream_path}, {"weights", f.weights_path}}},
      {"outputs", json{{"table", (dir / "ablate.json").string()}}},
      {"base_config", config_json(f.cfg)},
      {"repeats", repeats},
  };
  write_json(dir / "ablate_manifest.json", manifest);
  std::cout << rows.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"test-time adaptation toolkit"};
  app.set_version_flag("--version", std::string("ttakit ") + TTAKIT_VERSION);
  app.require_subcommand(1);

  SynthFlags synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate the synthetic shift benchmark");
  synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "RNG seed")->envname("TTA_SEED");
  synth_cmd->add_option("--d", synth.d, "feature dim")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--n-source", synth.n_source, "source sample count")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--n-target", synth.n_target, "target sample count")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--shift", synth.shift, "target shift magnitude");
  synth_cmd->add_option("--novel-weight", synth.novel_weight,
                        "fraction of target fakes from the unseen mode");
  synth_cmd->add_option("--epochs", synth.epochs, "detector training epochs");
  synth_cmd->add_option("--lr", synth.lr, "detector learning rate");

  TrainBaseFlags train;
  CLI::App* train_cmd =
      app.add_subcommand("train-base", "train the toy linear detector");
  train_cmd->add_option("--source", train.source_path, "labeled source stream")
      ->required();
  train_cmd->add_option("--out", train.out_path, "weights file to write")
      ->required();
  train_cmd->add_option("--epochs", train.epochs, "full-batch GD epochs");
  train_cmd->add_option("--lr", train.lr, "learning rate");
  train_cmd->add_option("--seed", train.seed, "RNG seed")->envname("TTA_SEED");

  RunFlags run;
  CLI::App* run_cmd = app.add_subcommand("run", "adapt over a feature stream");
  run_cmd->add_option("--stream", run.stream_path, "feature stream")->required();
  run_cmd->add_option("--weights", run.weights_path, "classifier weights")
      ->required();
  run_cmd->add_option("--strategy", run.strategy,
                      "no_adapt|pseudo_label|prototype_only|ours")
      ->check(CLI::IsMember(
          {"no_adapt", "pseudo_label", "prototype_only", "ours"}));
  run_cmd->add_option("--out", run.out_dir, "output directory");
  add_strategy_options(run_cmd, run);

  RunFlags ablate;
  std::size_t repeats = 5;
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "component ablation grid over seeds");
  ablate_cmd->add_option("--stream", ablate.stream_path, "feature stream")
      ->required();
  ablate_cmd->add_option("--weights", ablate.weights_path, "classifier weights")
      ->required();
  ablate_cmd->add_option("--out", ablate.out_dir, "output directory");
  ablate_cmd->add_option("--repeats", repeats, "seeds per variant")
      ->check(CLI::PositiveNumber);
  add_strategy_options(ablate_cmd, ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (train_cmd->parsed()) return cmd_train_base(train);
    if (run_cmd->parsed()) return cmd_run(run);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate, repeats);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
