#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "tta/base_detector.hpp"
#include "tta/engine.hpp"
#include "tta/lcpc.hpp"
#include "tta/memory_bank.hpp"
#include "tta/numerics.hpp"
#include "tta/synthetic.hpp"

using namespace tta;

namespace {

Vec64 random_vec(std::mt19937_64& rng, std::size_t d, double lo = -1.0,
                 double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec64 v(d);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<Sample> random_batch(std::mt19937_64& rng, std::size_t n,
                                 std::size_t d) {
  std::vector<Sample> batch(n);
  for (auto& s : batch) {
    s.feature = random_vec(rng, d);
    s.logits = random_vec(rng, 2, -4.0, 4.0);
  }
  return batch;
}

void BM_cosine_sim(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto d = std::size_t(state.range(0));
  const Vec64 a = random_vec(rng, d);
  const Vec64 b = random_vec(rng, d);
  for (auto _ : state) {
    double c = cosine_sim(a, b);
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_softmax(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Vec64 logits = random_vec(rng, std::size_t(state.range(0)), -6.0, 6.0);
  for (auto _ : state) {
    ProbDist p = softmax(logits);
    benchmark::DoNotOptimize(p);
  }
  state.SetItemsProcessed(state.iterations());
}

// steady-state insert cost: the bank is already full, so every batch pays
// for entropy eviction
void BM_bank_insert(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const std::size_t d = 16;
  const auto capacity = std::size_t(state.range(0));
  Mat64 w(2, d);
  for (auto& v : w.values) v = random_vec(rng, 1)[0];
  MemoryBank bank = MemoryBank::init_from_classifier(w, capacity);
  while (bank.size() < capacity) bank.insert_batch(random_batch(rng, 32, d));

  const auto batch = random_batch(rng, 32, d);
  for (auto _ : state) {
    auto ids = bank.insert_batch(batch);
    benchmark::DoNotOptimize(ids);
  }
  state.SetItemsProcessed(state.iterations() * 32);
}

void BM_bank_nearest(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const std::size_t d = 16;
  const auto capacity = std::size_t(state.range(0));
  Mat64 w(2, d);
  for (auto& v : w.values) v = random_vec(rng, 1)[0];
  MemoryBank bank = MemoryBank::init_from_classifier(w, capacity);
  while (bank.size() < capacity) bank.insert_batch(random_batch(rng, 32, d));

  const Vec64 query = random_vec(rng, d);
  for (auto _ : state) {
    NeighborSet ns = bank.nearest(query, 16);
    benchmark::DoNotOptimize(ns);
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_lcpc_predict(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const std::size_t d = 16;
  const auto ens = TransformEnsemble::random_init(
      d, TransformEnsemble::default_output_dim(d), std::size_t(state.range(0)), 7);
  const std::vector<Vec64> protos{random_vec(rng, d), random_vec(rng, d)};
  const Vec64 feature = random_vec(rng, d);
  for (auto _ : state) {
    PredictResult r = predict(ens, feature, protos);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_lcpc_gradients(benchmark::State& state) {
  std::mt19937_64 rng(6);
  const std::size_t d = 16;
  const auto ens = TransformEnsemble::random_init(
      d, TransformEnsemble::default_output_dim(d), 5, 7);
  const std::vector<Vec64> protos{random_vec(rng, d), random_vec(rng, d)};
  std::vector<TrainingSample> batch(32);
  for (auto& s : batch) {
    s.feature = random_vec(rng, d);
    s.base_logits = random_vec(rng, 2, -4.0, 4.0);
    for (int nb = 0; nb < 16; ++nb) {
      s.neighbor_features.push_back(random_vec(rng, d));
      s.neighbor_preds.push_back(softmax(random_vec(rng, 2, -4.0, 4.0)));
    }
  }
  for (auto _ : state) {
    auto g = lcpc_gradients(ens, batch, protos, 0.7, 0.1, false);
    benchmark::DoNotOptimize(g);
  }
  state.SetItemsProcessed(state.iterations() * 32);
}

// full online step on the synthetic benchmark stream, varying update count
void BM_engine_batch(benchmark::State& state) {
  SynthConfig cfg = SynthConfig::benchmark_default(0);
  cfg.n_source = 1000;
  cfg.n_target = 1024;
  SynthStreams data = generate_synthetic(cfg);
  BaseTrainResult det = train_base_detector(data.source.records, 2, 60, 0.1, 0);
  det.detector.annotate(data.target.records);

  StrategyConfig rc;
  rc.strategy = Strategy::ours;
  rc.k_steps = std::size_t(state.range(0));
  Engine engine(det.detector.weights, rc);

  std::vector<std::vector<Sample>> batches;
  for (std::size_t i = 0; i + rc.batch_size <= data.target.records.size();
       i += rc.batch_size) {
    std::vector<Sample> b;
    for (std::size_t j = 0; j < rc.batch_size; ++j)
      b.push_back(strip_label(data.target.records[i + j]));
    batches.push_back(std::move(b));
  }

  std::size_t next = 0;
  for (auto _ : state) {
    auto preds = engine.process_batch(batches[next]);
    benchmark::DoNotOptimize(preds);
    next = (next + 1) % batches.size();
  }
  state.SetItemsProcessed(state.iterations() * rc.batch_size);
}

}  // namespace

BENCHMARK(BM_cosine_sim)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(BM_softmax)->Arg(2)->Arg(16);
BENCHMARK(BM_bank_insert)->Arg(256)->Arg(1000)->Arg(4000);
BENCHMARK(BM_bank_nearest)->Arg(256)->Arg(1000)->Arg(4000);
BENCHMARK(BM_lcpc_predict)->Arg(1)->Arg(5)->Arg(10);
BENCHMARK(BM_lcpc_gradients);
BENCHMARK(BM_engine_batch)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
