#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tta/numerics.hpp"

namespace tta {

/// One trainable affine map d -> d_t.
struct TransformLayer {
  Mat64 weight;  // d_t x d
  Vec64 bias;    // d_t
};

/// Ensemble of independently initialized transform layers. Diversity comes
/// only from the per-layer random initialization.
struct TransformEnsemble {
  std::vector<TransformLayer> layers;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;

  /// Weights uniform in [-1/sqrt(d), 1/sqrt(d)], zero bias, one RNG
  /// substream per layer. Bit-reproducible given (d, d_t, n_layers, seed).
  static TransformEnsemble random_init(std::size_t d, std::size_t d_t,
                                       std::size_t n_layers, std::uint64_t seed);

  /// Single identity layer (d_t = d). Used by the no-transform ablation
  /// variant and by reduction tests.
  static TransformEnsemble identity_fixture(std::size_t d);

  static std::size_t default_output_dim(std::size_t d) {
    return d / 2 > 0 ? d / 2 : 1;
  }

  std::size_t param_count() const;
  Vec64 flatten_params() const;
  void set_params(std::span<const double> flat);
};

struct PredictResult {
  ProbDist mean;                   // ensemble average
  std::vector<ProbDist> per_layer;
};

/// Per layer: softmax over cosine similarities between the transformed
/// feature and the transformed prototypes; final prediction is the
/// arithmetic mean across layers.
PredictResult predict(const TransformEnsemble& ens, const Vec64& feature,
                      const std::vector<Vec64>& prototypes);

/// Mean soft-target cross-entropy over samples whose base confidence
/// max(softmax(logits)) exceeds conf. Returns {0, 0} when nothing passes
/// the filter.
std::pair<double, std::size_t> lcpc_loss(std::span<const Vec64> base_logits,
                                         std::span<const ProbDist> preds,
                                         double conf);

/// Per-layer parameter gradients, same shapes and flattening order as the
/// ensemble.
struct LcpcGradients {
  std::vector<Mat64> weight;
  std::vector<Vec64> bias;

  Vec64 flatten() const;
};

/// One sample of a training batch. neighbor_preds are the detached
/// consistency targets; neighbor_features are needed only when gradients
/// flow through the neighbor predictions.
struct TrainingSample {
  Vec64 feature;
  Vec64 base_logits;
  std::vector<Vec64> neighbor_features;
  std::vector<ProbDist> neighbor_preds;
};

struct LossTerms {
  double total = 0.0;
  double self_training = 0.0;  // confidence-filtered CE term
  double consistency = 0.0;    // neighbor alignment term (batch mean)
  std::size_t confident = 0;
};

/// Total loss: self-training term + alpha * consistency term. When
/// grad_through_neighbors is set, neighbor predictions are recomputed from
/// neighbor_features as part of the differentiated function; otherwise the
/// stored neighbor_preds are constants.
LossTerms lcpc_total_loss(const TransformEnsemble& ens,
                          std::span<const TrainingSample> batch,
                          const std::vector<Vec64>& prototypes, double conf,
                          double alpha, bool grad_through_neighbors);

/// Analytic gradients of lcpc_total_loss with respect to every layer's
/// weight and bias, through both the transformed-feature and the
/// transformed-prototype path. Validated against finite differences.
std::pair<LcpcGradients, LossTerms> lcpc_gradients(
    const TransformEnsemble& ens, std::span<const TrainingSample> batch,
    const std::vector<Vec64>& prototypes, double conf, double alpha,
    bool grad_through_neighbors);

}  // namespace tta
