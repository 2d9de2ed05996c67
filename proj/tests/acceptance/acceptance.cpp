// Release gate. Each numbered criterion prints one [PASS]/[FAIL] line with
// the measured quantity behind the verdict; the exit code is the number of
// failed criteria.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "support/oracles.hpp"
#include "tta/base_detector.hpp"
#include "tta/engine.hpp"
#include "tta/error.hpp"
#include "tta/stream_io.hpp"
#include "tta/synthetic.hpp"

#ifndef TTAKIT_BIN
#error "TTAKIT_BIN must point at the ttakit executable"
#endif

using namespace tta;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// ---- tolerances --------------------------------------------------------------

constexpr double kGradRelTol = 1e-4;    // criterion 1
constexpr double kGradSeconds = 30.0;
constexpr double kAucTol = 1e-12;       // criterion 2
constexpr double kEerTol = 1e-9;
constexpr double kMetricSeconds = 10.0;
constexpr double kReductionTol = 1e-9;  // criterion 4
constexpr double kGainOverBase = 0.03;  // criteria 5 and 6
constexpr double kSlackVsProto = 0.005; // criterion 5
constexpr double kBenchSeconds = 120.0;
constexpr double kSlackVsSingle = 0.01; // criterion 6
constexpr double kSlackKs3 = 0.01;      // criterion 7

constexpr std::array<std::uint64_t, 5> kBenchSeeds{0, 1, 2, 3, 4};
constexpr std::size_t kDetectorEpochs = 300;
constexpr double kDetectorLr = 0.1;

int g_failures = 0;

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id, name,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- criterion 1: analytic gradients vs central differences -------------------

void criterion_gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20260814);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ulogit(-4.0, 4.0);
  std::uniform_real_distribution<double> uconf(0.0, 1.0);
  std::uniform_real_distribution<double> ualpha(0.0, 1.0);

  double worst = 0.0;
  int configs = 0;
  for (int rep = 0; rep < 120; ++rep) {
    const std::size_t d = 2 + std::size_t(rep) % 5;        // <= 6
    const std::size_t d_t = 1 + std::size_t(rep) % 3;
    const std::size_t n_layers = 1 + std::size_t(rep) % 3; // <= 3
    const std::size_t batch = 1 + std::size_t(rep) % 4;    // <= 4
    const std::size_t n_nbrs = std::size_t(rep) % 4;
    const double conf = uconf(rng);
    const double alpha = ualpha(rng);
    const bool through = rep % 2 == 1;

    auto ens = TransformEnsemble::random_init(d, d_t, n_layers,
                                              5000 + std::uint64_t(rep));
    std::vector<Vec64> protos(2, Vec64(d));
    for (auto& p : protos)
      for (auto& v : p) v = u(rng);

    std::vector<TrainingSample> ts(batch);
    for (auto& s : ts) {
      s.feature.resize(d);
      for (auto& v : s.feature) v = u(rng);
      s.base_logits = {ulogit(rng), ulogit(rng)};
      for (std::size_t nb = 0; nb < n_nbrs; ++nb) {
        Vec64 nf(d);
        for (auto& v : nf) v = u(rng);
        s.neighbor_features.push_back(std::move(nf));
        s.neighbor_preds.push_back(softmax(Vec64{ulogit(rng), ulogit(rng)}));
      }
    }

    const auto got = lcpc_gradients(ens, ts, protos, conf, alpha, through);
    const Vec64 analytic = got.first.flatten();

    const Vec64 x0 = ens.flatten_params();
    auto f = [&](const Vec64& x) {
      TransformEnsemble probe = ens;
      probe.set_params(x);
      return lcpc_total_loss(probe, ts, protos, conf, alpha, through).total;
    };
    const Vec64 numeric = finite_diff_gradient(f, x0, 1e-6);

    double scale = 1e-3;  // floor keeps finite-difference noise out of the ratio
    for (double g : numeric) scale = std::max(scale, std::abs(g));
    double err = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
      err = std::max(err, std::abs(analytic[i] - numeric[i]) / scale);
    worst = std::max(worst, err);
    ++configs;
  }
  const double secs = seconds_since(t0);
  report(1, "analytic gradient matches finite differences",
         worst < kGradRelTol && secs < kGradSeconds && configs >= 100,
         fmt("%d configs, max rel err %.2e, %.1fs", configs, worst, secs));
}

// ---- criterion 2: AUC and EER against slow oracles -----------------------------

void criterion_metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77002);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> grid(0, 5);

  double worst_auc = 0.0, worst_eer = 0.0;
  int instances = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + std::size_t(rep) % 49;  // <= 50
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    const bool ties = rep % 3 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = ties ? grid(rng) / 5.0 : u(rng);
      labels[i] = coin(rng);
    }
    labels[0] = 0;
    labels[n - 1] = 1;
    worst_auc = std::max(
        worst_auc, std::abs(auc(scores, labels) - oracle::auc_pairs(scores, labels)));
    worst_eer = std::max(
        worst_eer, std::abs(eer(scores, labels) - oracle::eer_sweep(scores, labels)));
    ++instances;
  }
  const double secs = seconds_since(t0);
  report(2, "AUC and EER match exhaustive oracles",
         worst_auc <= kAucTol && worst_eer <= kEerTol && secs < kMetricSeconds &&
             instances == 1000,
         fmt("%d instances, auc dev %.1e, eer dev %.1e, %.1fs", instances,
             worst_auc, worst_eer, secs));
}

// ---- criterion 3: nearest() against brute force --------------------------------

void criterion_knn_oracle() {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> usize(10, 498);
  std::uniform_int_distribution<std::size_t> udim(2, 12);
  std::uniform_int_distribution<std::size_t> uk(1, 40);

  int banks = 0, mismatches = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = udim(rng);
    const std::size_t n_inserted = usize(rng);  // + 2 seeds stays <= 500
    Mat64 w(2, d);
    for (auto& v : w.values) v = u(rng);
    MemoryBank bank = MemoryBank::init_from_classifier(w, n_inserted + 2);

    std::vector<Sample> batch(n_inserted);
    for (auto& s : batch) {
      s.feature.resize(d);
      for (auto& v : s.feature) v = u(rng);
      s.logits = {u(rng), u(rng)};
    }
    const auto ids = bank.insert_batch(batch);

    std::vector<std::pair<std::uint64_t, Vec64>> pool;
    for (const BankEntry* e : bank.entries()) pool.emplace_back(e->id, e->feature);

    for (int q = 0; q < 5; ++q) {
      Vec64 query(d);
      for (auto& v : query) v = u(rng);
      const std::size_t k = uk(rng);
      const bool exclude = q % 2 == 1;
      const std::uint64_t ex_id = ids[std::size_t(q) % ids.size()];

      const NeighborSet got =
          exclude ? bank.nearest(query, k, ex_id) : bank.nearest(query, k);
      const auto want = oracle::knn_brute(
          query, pool, k,
          exclude ? ex_id : std::numeric_limits<std::uint64_t>::max());

      bool ok = got.entries.size() == want.size();
      for (std::size_t i = 0; ok && i < want.size(); ++i)
        ok = got.entries[i]->id == want[i].id;
      if (!ok) ++mismatches;
    }
    ++banks;
  }
  report(3, "bank nearest() equals brute-force search",
         mismatches == 0 && banks == 200,
         fmt("%d banks x 5 queries, %d mismatches", banks, mismatches));
}

// ---- criterion 4: reduced ours equals prototype_only ----------------------------

void criterion_reduction() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst = 0.0;
  int n_streams = 0;

  auto compare_on = [&](const Mat64& w, const std::vector<FeatureRecord>& records) {
    StrategyConfig reduced;
    reduced.strategy = Strategy::ours;
    reduced.identity_transform = true;
    reduced.enable_lcpc_training = false;
    reduced.enable_nfc = false;
    StrategyConfig proto;
    proto.strategy = Strategy::prototype_only;

    VectorSource sa(records);
    VectorSource sb(records);
    const EvaluationReport ra = run_stream(reduced, w, sa, 1);
    const EvaluationReport rb = run_stream(proto, w, sb, 1);
    for (std::size_t i = 0; i < ra.per_sample_scores.size(); ++i)
      worst = std::max(worst, std::abs(ra.per_sample_scores[i].second -
                                       rb.per_sample_scores[i].second));
    ++n_streams;
  };

  for (int rep = 0; rep < 6; ++rep) {
    const std::size_t d = 3 + std::size_t(rep);
    Mat64 w(2, d);
    for (auto& v : w.values) v = u(rng);
    std::vector<FeatureRecord> records(120);
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto& r = records[i];
      r.feature.resize(d);
      for (auto& v : r.feature) v = u(rng);
      r.logits = matvec(w, r.feature);
      r.label = int(i % 2);
    }
    compare_on(w, records);
  }

  // and on the frozen benchmark stream
  SynthConfig cfg = SynthConfig::benchmark_default(0);
  cfg.n_source = 800;
  cfg.n_target = 600;
  SynthStreams data = generate_synthetic(cfg);
  BaseTrainResult det =
      train_base_detector(data.source.records, 2, 60, kDetectorLr, 0);
  det.detector.annotate(data.target.records);
  compare_on(det.detector.weights, data.target.records);

  report(4, "reduced ours equals prototype_only",
         worst <= kReductionTol && n_streams == 7,
         fmt("%d streams, max score gap %.1e", n_streams, worst));
}

// ---- criteria 5-7: the frozen synthetic benchmark -------------------------------

struct VariantStats {
  std::vector<double> aucs;
  std::vector<double> spb;  // seconds per batch

  double mean_auc() const {
    double s = 0.0;
    for (double a : aucs) s += a;
    return s / double(aucs.size());
  }
  double mean_spb() const {
    double s = 0.0;
    for (double t : spb) s += t;
    return s / double(spb.size());
  }
};

StrategyConfig bench_config(Strategy s, std::uint64_t seed) {
  StrategyConfig cfg;
  cfg.strategy = s;
  cfg.seed = seed;
  return cfg;
}

void run_benchmark(VariantStats& no_adapt, VariantStats& proto, VariantStats& ours,
                   VariantStats& lcpc_only, VariantStats& nfc_only,
                   VariantStats& ks2, VariantStats& ks3, double& core_seconds) {
  core_seconds = 0.0;
  for (std::uint64_t seed : kBenchSeeds) {
    const auto t0 = Clock::now();
    SynthConfig cfg = SynthConfig::benchmark_default(seed);
    SynthStreams data = generate_synthetic(cfg);
    BaseTrainResult det = train_base_detector(data.source.records, 2,
                                              kDetectorEpochs, kDetectorLr, seed);
    det.detector.annotate(data.target.records);
    const Mat64& w = det.detector.weights;
    const auto& target = data.target.records;

    auto run_one = [&](const StrategyConfig& rc, VariantStats& out) {
      VectorSource src(target);
      const EvaluationReport rep = run_stream(rc, w, src, 1);
      out.aucs.push_back(rep.auc.value());
      out.spb.push_back(rep.seconds_per_batch);
    };

    run_one(bench_config(Strategy::no_adapt, seed), no_adapt);
    run_one(bench_config(Strategy::prototype_only, seed), proto);
    run_one(bench_config(Strategy::ours, seed), ours);
    core_seconds += seconds_since(t0);

    StrategyConfig lc = bench_config(Strategy::ours, seed);
    lc.enable_nfc = false;
    run_one(lc, lcpc_only);

    StrategyConfig nf = bench_config(Strategy::ours, seed);
    nf.identity_transform = true;
    nf.enable_lcpc_training = false;
    run_one(nf, nfc_only);

    StrategyConfig k2 = bench_config(Strategy::ours, seed);
    k2.k_steps = 2;
    run_one(k2, ks2);
    StrategyConfig k3 = bench_config(Strategy::ours, seed);
    k3.k_steps = 3;
    run_one(k3, ks3);
  }
}

// ---- criterion 8: byte-identical reruns of the CLI ------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string("'") + TTAKIT_BIN + "' " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

void criterion_determinism() {
  const fs::path tmp = fs::temp_directory_path() /
                       ("tta_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(tmp);
  bool pass = false;
  std::string detail = "cli invocation failed";
  do {
    if (run_cli("synth --out " + (tmp / "data").string() +
                " --seed 11 --n-source 600 --n-target 300 --epochs 60") != 0)
      break;
    const std::string run_args =
        "run --stream " + (tmp / "data/target.fts").string() + " --weights " +
        (tmp / "data/weights.ftw").string() + " --strategy ours --seed 11 --out ";
    if (run_cli(run_args + (tmp / "a").string()) != 0) break;
    if (run_cli(run_args + (tmp / "b").string()) != 0) break;

    const std::string scores_a = slurp(tmp / "a/scores.txt");
    const bool scores_equal =
        !scores_a.empty() && scores_a == slurp(tmp / "b/scores.txt");

    // timing and output paths legitimately differ between the two runs
    auto canon = [&](const fs::path& p) {
      nlohmann::json j = nlohmann::json::parse(slurp(p));
      if (j.contains("seconds_per_batch")) j["seconds_per_batch"] = nullptr;
      if (j.contains("timing")) j["timing"] = nullptr;
      if (j.contains("outputs")) j["outputs"] = nullptr;
      return j;
    };
    const bool summaries_equal =
        canon(tmp / "a/summary.json") == canon(tmp / "b/summary.json");
    const bool manifests_equal =
        canon(tmp / "a/run_manifest.json") == canon(tmp / "b/run_manifest.json");
    pass = scores_equal && summaries_equal && manifests_equal;
    detail = fmt("scores %s, summaries %s, manifests %s",
                 scores_equal ? "identical" : "differ",
                 summaries_equal ? "match" : "differ",
                 manifests_equal ? "match" : "differ");
  } while (false);
  std::error_code ec;
  fs::remove_all(tmp, ec);
  report(8, "reruns are byte-identical modulo timing", pass, detail);
}

// ---- criterion 9: structural invariants ------------------------------------------

void criterion_invariants() {
  std::vector<std::string> violations;

  // bank capacity and per-class retention under heavy churn
  {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat64 w(3, 6);
    for (auto& v : w.values) v = u(rng);
    MemoryBank bank = MemoryBank::init_from_classifier(w, 30);
    for (int b = 0; b < 40; ++b) {
      std::vector<Sample> batch(17);
      for (auto& s : batch) {
        s.feature.resize(6);
        for (auto& v : s.feature) v = u(rng);
        s.logits = {u(rng) * 4, u(rng) * 4, u(rng) * 4};
      }
      bank.insert_batch(batch);
      if (bank.size() > 30) violations.push_back("bank size above capacity");
      for (std::size_t k = 0; k < 3; ++k) {
        if (bank.class_count(k) == 0) violations.push_back("class bucket emptied");
        if (bank.class_count(k) > 10) violations.push_back("per-class cap exceeded");
      }
    }
  }

  // every emitted prediction is a valid distribution, all strategies
  {
    SynthConfig cfg = SynthConfig::benchmark_default(13);
    cfg.n_source = 600;
    cfg.n_target = 400;
    SynthStreams data = generate_synthetic(cfg);
    BaseTrainResult det =
        train_base_detector(data.source.records, 2, 60, kDetectorLr, 13);
    det.detector.annotate(data.target.records);

    for (Strategy s : {Strategy::no_adapt, Strategy::pseudo_label,
                       Strategy::prototype_only, Strategy::ours}) {
      StrategyConfig rc = bench_config(s, 13);
      Engine engine(det.detector.weights, rc);
      std::vector<Sample> batch;
      for (const auto& rec : data.target.records) {
        batch.push_back(strip_label(rec));
        if (batch.size() == rc.batch_size) {
          for (const auto& p : engine.process_batch(batch)) {
            if (!p.raw.valid() || !p.calibrated.valid())
              violations.push_back("invalid distribution from " + to_string(s));
          }
          batch.clear();
        }
      }
    }
  }

  // online causality: the first half of the stream scores identically
  // whether or not the second half follows
  {
    SynthConfig cfg = SynthConfig::benchmark_default(29);
    cfg.n_source = 600;
    cfg.n_target = 256;
    SynthStreams data = generate_synthetic(cfg);
    BaseTrainResult det =
        train_base_detector(data.source.records, 2, 60, kDetectorLr, 29);
    det.detector.annotate(data.target.records);

    StrategyConfig rc = bench_config(Strategy::ours, 29);
    rc.lr = 1e-3;  // make training effects visible within a few batches
    Engine full(det.detector.weights, rc);
    Engine half(det.detector.weights, rc);
    std::vector<double> full_scores, half_scores;
    std::vector<Sample> batch;
    std::size_t processed = 0;
    for (const auto& rec : data.target.records) {
      batch.push_back(strip_label(rec));
      if (batch.size() == rc.batch_size) {
        for (const auto& p : full.process_batch(batch))
          full_scores.push_back(p.calibrated[1]);
        if (processed < 128)
          for (const auto& p : half.process_batch(batch))
            half_scores.push_back(p.calibrated[1]);
        processed += batch.size();
        batch.clear();
      }
    }
    if (half_scores.empty()) violations.push_back("causality probe ran empty");
    for (std::size_t i = 0; i < half_scores.size(); ++i) {
      if (full_scores[i] != half_scores[i]) {
        violations.push_back("future data changed a past score");
        break;
      }
    }
  }

  // label blindness: the adaptation path accepts only label-stripped samples,
  // and an unlabeled stream still yields every score (just no metrics)
  {
    static_assert(sizeof(Sample) == 2 * sizeof(Vec64),
                  "Sample must carry exactly feature and logits");
    SynthConfig cfg = SynthConfig::benchmark_default(31);
    cfg.n_source = 600;
    cfg.n_target = 200;
    SynthStreams data = generate_synthetic(cfg);
    BaseTrainResult det =
        train_base_detector(data.source.records, 2, 60, kDetectorLr, 31);
    det.detector.annotate(data.target.records);
    std::vector<FeatureRecord> unlabeled = data.target.records;
    for (auto& r : unlabeled) r.label = -1;
    VectorSource src(std::move(unlabeled));
    const EvaluationReport rep =
        run_stream(bench_config(Strategy::ours, 31), det.detector.weights, src, 1);
    if (rep.per_sample_scores.size() != 200)
      violations.push_back("unlabeled stream lost scores");
    if (rep.auc || rep.acc || rep.eer)
      violations.push_back("metrics appeared without labels");
  }

  std::string detail = "bank caps, distribution validity, causality, label blindness";
  if (!violations.empty()) detail = violations.front();
  report(9, "structural invariants hold", violations.empty(), detail);
}

}  // namespace

int main() {
  criterion_gradients();
  criterion_metric_oracles();
  criterion_knn_oracle();
  criterion_reduction();

  VariantStats no_adapt, proto, ours, lcpc_only, nfc_only, ks2, ks3;
  double core_seconds = 0.0;
  run_benchmark(no_adapt, proto, ours, lcpc_only, nfc_only, ks2, ks3, core_seconds);

  {
    const double gain = ours.mean_auc() - no_adapt.mean_auc();
    const double vs_proto = ours.mean_auc() - proto.mean_auc();
    report(5, "benchmark ordering over 5 seeds",
           gain >= kGainOverBase && vs_proto >= -kSlackVsProto &&
               core_seconds < kBenchSeconds,
           fmt("ours %.4f, no_adapt %.4f, prototype_only %.4f, %.0fs",
               ours.mean_auc(), no_adapt.mean_auc(), proto.mean_auc(),
               core_seconds));
  }
  {
    const bool pass = ours.mean_auc() >= no_adapt.mean_auc() + kGainOverBase &&
                      ours.mean_auc() >= lcpc_only.mean_auc() - kSlackVsSingle &&
                      ours.mean_auc() >= nfc_only.mean_auc() - kSlackVsSingle;
    report(6, "ablation ordering over 5 seeds", pass,
           fmt("full %.4f, baseline %.4f, lcpc_only %.4f, nfc_only %.4f",
               ours.mean_auc(), no_adapt.mean_auc(), lcpc_only.mean_auc(),
               nfc_only.mean_auc()));
  }
  {
    const bool time_monotone =
        ks2.mean_spb() > ours.mean_spb() && ks3.mean_spb() > ks2.mean_spb();
    const bool auc_holds = ks3.mean_auc() >= ours.mean_auc() - kSlackKs3;
    report(7, "extra update steps cost time, keep accuracy",
           time_monotone && auc_holds,
           fmt("spb %.4f/%.4f/%.4f s, auc k1 %.4f k3 %.4f", ours.mean_spb(),
               ks2.mean_spb(), ks3.mean_spb(), ours.mean_auc(), ks3.mean_auc()));
  }

  criterion_determinism();
  criterion_invariants();

  std::printf("%d/9 criteria passed\n", 9 - g_failures);
  return g_failures;
}
