#include "tta/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "tta/error.hpp"

namespace tta {
namespace {

AdamConfig adam_config_for(double lr) {
  AdamConfig cfg;
  cfg.lr = lr;
  return cfg;
}

const StrategyConfig& validated(const StrategyConfig& cfg) {
  cfg.validate();
  return cfg;
}

TransformEnsemble build_ensemble(const Mat64& weights, const StrategyConfig& cfg) {
  if (cfg.identity_transform)
    return TransformEnsemble::identity_fixture(weights.cols);
  const std::size_t d_t = cfg.transform_dim > 0
                              ? cfg.transform_dim
                              : TransformEnsemble::default_output_dim(weights.cols);
  return TransformEnsemble::random_init(weights.cols, d_t, cfg.n_layers,
                                        mix_seed(cfg.seed, 4));
}

}  // namespace

Engine::Engine(const Mat64& classifier_weights, const StrategyConfig& config)
    : cfg_(validated(config)),
      bank_(MemoryBank::init_from_classifier(classifier_weights,
                                             config.memory_capacity)),
      ensemble_(build_ensemble(classifier_weights, config)),
      adam_(ensemble_.param_count(), adam_config_for(config.lr)),
      pl_head_(classifier_weights),
      pl_adam_(classifier_weights.values.size(), adam_config_for(config.lr)) {}

std::vector<CalibratedPrediction> Engine::process_batch(
    std::span<const Sample> batch) {
  if (batch.empty()) throw ArgumentError("process_batch: empty batch");
  for (const Sample& s : batch) {
    if (s.feature.size() != bank_.feature_dim())
      throw ArgumentError("process_batch: feature dim does not match engine");
    if (s.logits.size() != bank_.num_classes())
      throw ArgumentError("process_batch: logit count does not match engine");
  }
  std::vector<CalibratedPrediction> out;
  switch (cfg_.strategy) {
    case Strategy::no_adapt: out = batch_no_adapt(batch); break;
    case Strategy::pseudo_label: out = batch_pseudo_label(batch); break;
    case Strategy::prototype_only: out = batch_prototype_only(batch); break;
    case Strategy::ours: out = batch_ours(batch); break;
  }
  samples_seen_ += batch.size();
  return out;
}

std::vector<CalibratedPrediction> Engine::batch_no_adapt(
    std::span<const Sample> batch) {
  last_ = {};
  std::vector<CalibratedPrediction> out;
  out.reserve(batch.size());
  for (const Sample& s : batch) {
    ProbDist p = softmax(s.logits);
    out.push_back({p, p, 0});
  }
  return out;
}

std::vector<CalibratedPrediction> Engine::batch_pseudo_label(
    std::span<const Sample> batch) {
  last_ = {};
  const std::size_t c = pl_head_.rows;

  // harden this batch's confident predictions once, before any update
  std::vector<std::size_t> confident;
  std::vector<std::size_t> pseudo;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ProbDist p = softmax(matvec(pl_head_, batch[i].feature));
    const std::size_t top = argmax(p.probs);
    if (p[top] > cfg_.conf) {
      confident.push_back(i);
      pseudo.push_back(top);
    }
  }

  if (!confident.empty()) {
    if (cfg_.reset_optimizer_per_batch) pl_adam_.reset();
    try {
      for (std::size_t step = 0; step < cfg_.k_steps; ++step) {
        Mat64 grad(c, pl_head_.cols);
        double loss = 0.0;
        for (std::size_t n = 0; n < confident.size(); ++n) {
          const Sample& s = batch[confident[n]];
          const ProbDist p = softmax(matvec(pl_head_, s.feature));
          loss -= std::log(std::max(p[pseudo[n]], kEps));
          for (std::size_t k = 0; k < c; ++k) {
            const double delta = p[k] - (k == pseudo[n] ? 1.0 : 0.0);
            for (std::size_t j = 0; j < pl_head_.cols; ++j)
              grad.at(k, j) += delta * s.feature[j] / double(confident.size());
          }
        }
        adam_step(pl_head_.values, grad.values, pl_adam_);
        last_.loss = LossTerms{loss / double(confident.size()),
                               loss / double(confident.size()), 0.0,
                               confident.size()};
        last_.steps_run = step + 1;
        last_.trained = true;
      }
    } catch (const NumericError&) {
      last_.skipped_non_finite = true;
    }
  }

  // scores come from the head as it now stands
  std::vector<CalibratedPrediction> out;
  out.reserve(batch.size());
  for (const Sample& s : batch) {
    ProbDist p = softmax(matvec(pl_head_, s.feature));
    out.push_back({p, p, 0});
  }
  return out;
}

std::vector<CalibratedPrediction> Engine::batch_prototype_only(
    std::span<const Sample> batch) {
  last_ = {};
  bank_.insert_batch(batch);
  const std::vector<Vec64> protos = current_prototypes();
  std::vector<CalibratedPrediction> out;
  out.reserve(batch.size());
  Vec64 sims(protos.size());
  for (const Sample& s : batch) {
    for (std::size_t k = 0; k < protos.size(); ++k)
      sims[k] = cosine_sim(s.feature, protos[k]);
    ProbDist p = softmax(sims);
    out.push_back({p, p, 0});
  }
  return out;
}

std::vector<CalibratedPrediction> Engine::batch_ours(
    std::span<const Sample> batch) {
  last_ = {};
  const std::vector<std::uint64_t> ids = bank_.insert_batch(batch);
  const std::vector<Vec64> protos = current_prototypes();

  // the neighbor sets are fixed for the whole batch: the bank only changes
  // at insertion time, and a sample never calibrates against its own entry
  std::vector<std::vector<Vec64>> nbr_feats(batch.size());
  if (cfg_.enable_nfc && cfg_.n_neighbors > 0) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const NeighborSet ns =
          bank_.nearest(batch[i].feature, cfg_.n_neighbors, ids[i]);
      nbr_feats[i].reserve(ns.entries.size());
      for (const BankEntry* e : ns.entries) nbr_feats[i].push_back(e->feature);
    }
  }

  std::vector<CalibratedPrediction> out =
      predict_calibrated(batch, protos, nbr_feats);

  if (cfg_.enable_lcpc_training) {
    bool any_confident = false;
    for (const Sample& s : batch) {
      const ProbDist t = softmax(s.logits);
      if (t[argmax(t.probs)] > cfg_.conf) {
        any_confident = true;
        break;
      }
    }
    if (any_confident || cfg_.enable_nfc) {
      if (cfg_.reset_optimizer_per_batch) adam_.reset();
      try {
        train_steps(batch, protos, nbr_feats);
      } catch (const NumericError&) {
        last_.skipped_non_finite = true;
      }
      if (cfg_.predict_after_update && last_.trained)
        out = predict_calibrated(batch, protos, nbr_feats);
    }
  }
  return out;
}

std::vector<Vec64> Engine::current_prototypes() const {
  std::vector<Vec64> protos;
  protos.reserve(bank_.num_classes());
  for (std::size_t k = 0; k < bank_.num_classes(); ++k)
    protos.push_back(bank_.class_prototype(k));
  return protos;
}

std::vector<CalibratedPrediction> Engine::predict_calibrated(
    std::span<const Sample> batch, const std::vector<Vec64>& prototypes,
    const std::vector<std::vector<Vec64>>& neighbor_features) const {
  std::vector<CalibratedPrediction> out;
  out.reserve(batch.size());
  std::vector<ProbDist> nbr_preds;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ProbDist raw = predict(ensemble_, batch[i].feature, prototypes).mean;
    nbr_preds.clear();
    for (const Vec64& f : neighbor_features[i])
      nbr_preds.push_back(predict(ensemble_, f, prototypes).mean);
    out.push_back(calibrate(raw, nbr_preds));
  }
  return out;
}

void Engine::train_steps(std::span<const Sample> batch,
                         const std::vector<Vec64>& prototypes,
                         const std::vector<std::vector<Vec64>>& neighbor_features) {
  std::vector<TrainingSample> ts(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ts[i].feature = batch[i].feature;
    ts[i].base_logits = batch[i].logits;
    ts[i].neighbor_features = neighbor_features[i];
  }
  for (std::size_t step = 0; step < cfg_.k_steps; ++step) {
    if (!cfg_.nfc_grad_through_neighbors) {
      // refresh the detached consistency targets with the current ensemble
      for (std::size_t i = 0; i < batch.size(); ++i) {
        ts[i].neighbor_preds.clear();
        for (const Vec64& f : neighbor_features[i])
          ts[i].neighbor_preds.push_back(predict(ensemble_, f, prototypes).mean);
      }
    }
    auto [grads, terms] =
        lcpc_gradients(ensemble_, ts, prototypes, cfg_.conf, cfg_.alpha,
                       cfg_.nfc_grad_through_neighbors);
    Vec64 params = ensemble_.flatten_params();
    const Vec64 flat = grads.flatten();
    adam_step(params, flat, adam_);
    ensemble_.set_params(params);
    last_.loss = terms;
    last_.steps_run = step + 1;
    last_.trained = true;
  }
}

EvaluationReport run_stream(const StrategyConfig& cfg,
                            const Mat64& classifier_weights, RecordSource& stream,
                            std::uint32_t positive_class) {
  if (positive_class >= classifier_weights.rows)
    throw ArgumentError("run_stream: positive class out of range");
  Engine engine(classifier_weights, cfg);

  EvaluationReport rep;
  rep.strategy = to_string(cfg.strategy);
  rep.config_echo = cfg.echo();

  std::vector<double> scores;
  std::vector<int> labels01;
  bool all_labeled = true;
  std::vector<Sample> batch;
  double total_seconds = 0.0;
  std::size_t n_batches = 0;

  auto flush = [&]() {
    if (batch.empty()) return;
    const auto t0 = std::chrono::steady_clock::now();
    const auto preds = engine.process_batch(batch);
    const auto t1 = std::chrono::steady_clock::now();
    total_seconds += std::chrono::duration<double>(t1 - t0).count();
    ++n_batches;
    for (const auto& p : preds) scores.push_back(p.calibrated[positive_class]);
    batch.clear();
  };

  while (auto r = stream.next()) {
    if (r->label < 0) {
      all_labeled = false;
      labels01.push_back(-1);
    } else {
      labels01.push_back(r->label == int(positive_class) ? 1 : 0);
    }
    batch.push_back(strip_label(*r));
    if (batch.size() == cfg.batch_size) flush();
  }
  flush();

  rep.per_sample_scores.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    rep.per_sample_scores.emplace_back(i, scores[i]);
  rep.seconds_per_batch = n_batches > 0 ? total_seconds / double(n_batches) : 0.0;

  if (all_labeled && !scores.empty()) {
    try {
      rep.auc = auc(scores, labels01);
    } catch (const MetricError&) {}
    try {
      rep.eer = eer(scores, labels01);
    } catch (const MetricError&) {}
    rep.acc = acc(scores, labels01);
  }
  return rep;
}

}  // namespace tta
