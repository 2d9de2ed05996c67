// End-to-end checks against the installed command-line surface. Each case
// spawns the real binary in a scratch directory.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tta/stream_io.hpp"

#ifndef TTAKIT_BIN
#error "TTAKIT_BIN must point at the ttakit executable"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr interleaved
};

RunResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + TTAKIT_BIN +
                          "' " + args + " 2>&1";
  std::array<char, 4096> buf;
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe))
    out.append(buf.data(), n);
  const int status = pclose(pipe);
  RunResult r;
  r.output = out;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("tta_cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json slurp_json(const std::string& path) { return json::parse(slurp(path)); }

// small but non-trivial benchmark instance, reused across cases
void make_fixture(const TempDir& tmp) {
  const RunResult r = run_cli("synth --out " + tmp.sub("data") +
                              " --seed 3 --n-source 600 --n-target 300 --epochs 60");
  REQUIRE(r.exit_code == 0);
}

}  // namespace

TEST_CASE("--version prints the tool name") {
  const RunResult r = run_cli("--version");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("ttakit") != std::string::npos);
}

TEST_CASE("no subcommand is a usage error") {
  const RunResult r = run_cli("");
  CHECK(r.exit_code == 2);

  const RunResult bad = run_cli("frobnicate");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("synth writes streams, weights, and a manifest") {
  TempDir tmp;
  const RunResult r = run_cli("synth --out " + tmp.sub("data") +
                              " --seed 7 --n-source 500 --n-target 250 --epochs 40");
  REQUIRE(r.exit_code == 0);

  tta::StreamData src = tta::load_stream(tmp.sub("data") + "/source.fts");
  tta::StreamData tgt = tta::load_stream(tmp.sub("data") + "/target.fts");
  CHECK(src.records.size() == 500);
  CHECK(tgt.records.size() == 250);
  CHECK(src.header.d == 16);
  CHECK(src.header.c == 2);
  for (const auto& rec : src.records) CHECK((rec.label == 0 || rec.label == 1));
  // synth annotates logits before writing
  bool any_logit = false;
  for (const auto& rec : tgt.records)
    for (double l : rec.logits) any_logit |= l != 0.0;
  CHECK(any_logit);

  tta::ClassifierFile clf = tta::read_weights(tmp.sub("data") + "/weights.ftw");
  CHECK(clf.weights.rows == 2);
  CHECK(clf.weights.cols == 16);
  CHECK(clf.positive_class == 1);

  const json manifest = slurp_json(tmp.sub("data") + "/synth_manifest.json");
  CHECK(manifest["command"] == "synth");
  CHECK(manifest["synth_config"]["seed"] == 7);
  CHECK(manifest["detector"]["train_accuracy"].get<double>() > 0.9);

  // the one-line summary on stdout is parseable JSON
  const json line = json::parse(r.output.substr(r.output.rfind('{')));
  CHECK(line["source_records"] == 500);
}

TEST_CASE("run produces scores, summary, and manifest") {
  TempDir tmp;
  make_fixture(tmp);
  const RunResult r = run_cli("run --stream " + tmp.sub("data") + "/target.fts" +
                              " --weights " + tmp.sub("data") + "/weights.ftw" +
                              " --strategy ours --out " + tmp.sub("out") +
                              " --seed 1");
  REQUIRE(r.exit_code == 0);

  // scores.txt: one "index score" line per record, indices sequential
  std::istringstream scores(slurp(tmp.sub("out") + "/scores.txt"));
  std::string line;
  std::size_t expect_idx = 0;
  while (std::getline(scores, line)) {
    std::istringstream ls(line);
    std::size_t idx;
    double score;
    REQUIRE((ls >> idx >> score));
    CHECK(idx == expect_idx++);
    CHECK(score >= 0.0);
    CHECK(score <= 1.0);
  }
  CHECK(expect_idx == 300);

  const json summary = slurp_json(tmp.sub("out") + "/summary.json");
  CHECK(summary["strategy"] == "ours");
  CHECK(summary["n_samples"] == 300);
  CHECK(summary["auc"].is_number());
  CHECK(summary["auc"].get<double>() > 0.5);
  CHECK(summary["acc"].is_number());
  CHECK(summary["eer"].is_number());

  const json manifest = slurp_json(tmp.sub("out") + "/run_manifest.json");
  CHECK(manifest["command"] == "run");
  CHECK(manifest["config"]["strategy"] == "ours");
  CHECK(manifest["config"]["seed"] == 1);
  CHECK(manifest["positive_class"] == 1);
}

TEST_CASE("identical runs produce byte-identical scores") {
  TempDir tmp;
  make_fixture(tmp);
  const std::string base = "run --stream " + tmp.sub("data") + "/target.fts" +
                           " --weights " + tmp.sub("data") + "/weights.ftw" +
                           " --strategy ours --seed 5 --out ";
  REQUIRE(run_cli(base + tmp.sub("a")).exit_code == 0);
  REQUIRE(run_cli(base + tmp.sub("b")).exit_code == 0);
  CHECK(slurp(tmp.sub("a") + "/scores.txt") == slurp(tmp.sub("b") + "/scores.txt"));

  // manifests match too: no timestamps or machine state in them
  json ma = slurp_json(tmp.sub("a") + "/run_manifest.json");
  json mb = slurp_json(tmp.sub("b") + "/run_manifest.json");
  ma["outputs"] = mb["outputs"] = nullptr;  // paths differ by design
  ma["timing"] = mb["timing"] = nullptr;    // wall time may differ
  CHECK(ma == mb);
}

TEST_CASE("TTA_SEED environment variable feeds the seed option") {
  TempDir tmp;
  make_fixture(tmp);
  const std::string rest = "run --stream " + tmp.sub("data") + "/target.fts" +
                           " --weights " + tmp.sub("data") + "/weights.ftw" +
                           " --strategy ours --out ";
  REQUIRE(run_cli(rest + tmp.sub("env"), "TTA_SEED=9").exit_code == 0);
  REQUIRE(run_cli(rest + tmp.sub("flag") + " --seed 9").exit_code == 0);
  REQUIRE(run_cli(rest + tmp.sub("other") + " --seed 10").exit_code == 0);

  CHECK(slurp(tmp.sub("env") + "/scores.txt") ==
        slurp(tmp.sub("flag") + "/scores.txt"));
  CHECK(slurp(tmp.sub("env") + "/scores.txt") !=
        slurp(tmp.sub("other") + "/scores.txt"));

  // explicit flag beats the environment
  REQUIRE(run_cli(rest + tmp.sub("both") + " --seed 10", "TTA_SEED=9").exit_code == 0);
  CHECK(slurp(tmp.sub("both") + "/scores.txt") ==
        slurp(tmp.sub("other") + "/scores.txt"));
}

TEST_CASE("strategy strings map to distinct behavior") {
  TempDir tmp;
  make_fixture(tmp);
  const std::string base = "run --stream " + tmp.sub("data") + "/target.fts" +
                           " --weights " + tmp.sub("data") + "/weights.ftw" +
                           " --seed 2 --out ";
  REQUIRE(run_cli(base + tmp.sub("na") + " --strategy no_adapt").exit_code == 0);
  REQUIRE(run_cli(base + tmp.sub("po") + " --strategy prototype_only").exit_code == 0);
  CHECK(slurp(tmp.sub("na") + "/scores.txt") != slurp(tmp.sub("po") + "/scores.txt"));

  const RunResult bad = run_cli(base + tmp.sub("x") + " --strategy nonsense");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("usage errors exit 2, runtime errors exit 1") {
  TempDir tmp;
  make_fixture(tmp);

  // missing required option
  CHECK(run_cli("run --stream foo.fts").exit_code == 2);
  // constraint violation
  CHECK(run_cli("run --stream a --weights b --conf 3.0").exit_code == 2);
  CHECK(run_cli("run --stream a --weights b --lr 0").exit_code == 2);

  // nonexistent input file
  const RunResult missing = run_cli("run --stream " + tmp.sub("nope.fts") +
                                    " --weights " + tmp.sub("data") + "/weights.ftw");
  CHECK(missing.exit_code == 1);
  CHECK(missing.output.find("error:") != std::string::npos);

  // stream/weights header mismatch: a valid weights file of the wrong width
  tta::Mat64 w8(2, 8);
  for (auto& v : w8.values) v = 0.25;
  tta::write_weights(tmp.sub("w8.ftw"), w8, 1);
  const RunResult mismatch =
      run_cli("run --stream " + tmp.sub("data") + "/target.fts --weights " +
              tmp.sub("w8.ftw") + " --out " + tmp.sub("mm"));
  CHECK(mismatch.exit_code == 1);
  CHECK(mismatch.output.find("disagree") != std::string::npos);
}

TEST_CASE("csv streams work through the same run path") {
  TempDir tmp;
  make_fixture(tmp);
  // convert the binary target stream to csv
  tta::StreamData tgt = tta::load_stream(tmp.sub("data") + "/target.fts");
  tta::write_csv_stream(tmp.sub("target.csv"), tgt.header, tgt.records);

  const std::string base = " --weights " + tmp.sub("data") + "/weights.ftw" +
                           " --strategy ours --seed 4 --out ";
  REQUIRE(run_cli("run --stream " + tmp.sub("data") + "/target.fts" + base +
                  tmp.sub("bin")).exit_code == 0);
  REQUIRE(run_cli("run --stream " + tmp.sub("target.csv") + base +
                  tmp.sub("csv")).exit_code == 0);
  CHECK(slurp(tmp.sub("bin") + "/scores.txt") == slurp(tmp.sub("csv") + "/scores.txt"));
}

TEST_CASE("train-base writes a loadable weights file") {
  TempDir tmp;
  make_fixture(tmp);
  const RunResult r = run_cli("train-base --source " + tmp.sub("data") +
                              "/source.fts --out " + tmp.sub("w2.ftw") +
                              " --epochs 40");
  REQUIRE(r.exit_code == 0);
  tta::ClassifierFile clf = tta::read_weights(tmp.sub("w2.ftw"));
  CHECK(clf.weights.rows == 2);
  CHECK(clf.weights.cols == 16);
  const json manifest = slurp_json(tmp.sub("w2.ftw") + ".manifest.json");
  CHECK(manifest["command"] == "train-base");
  CHECK(manifest["train_accuracy"].get<double>() > 0.9);
}

TEST_CASE("ablate emits the four-variant table") {
  TempDir tmp;
  make_fixture(tmp);
  const RunResult r = run_cli("ablate --stream " + tmp.sub("data") + "/target.fts" +
                              " --weights " + tmp.sub("data") + "/weights.ftw" +
                              " --out " + tmp.sub("abl") + " --repeats 2 --seed 0");
  REQUIRE(r.exit_code == 0);

  const json rows = slurp_json(tmp.sub("abl") + "/ablate.json");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0]["label"] == "baseline");
  CHECK(rows[1]["label"] == "lcpc_only");
  CHECK(rows[2]["label"] == "nfc_only");
  CHECK(rows[3]["label"] == "full");
  for (const auto& row : rows) {
    CHECK(row["per_seed_auc"].size() == 2);
    const double mean = row["mean_auc"].get<double>();
    CHECK(mean > 0.0);
    CHECK(mean <= 1.0);
  }
  // the adapted variants beat the frozen baseline on this benchmark
  CHECK(rows[3]["mean_auc"].get<double>() > rows[0]["mean_auc"].get<double>());

  const json manifest = slurp_json(tmp.sub("abl") + "/ablate_manifest.json");
  CHECK(manifest["repeats"] == 2);
}
