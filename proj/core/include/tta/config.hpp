#pragma once

#include <cstdint>
#include <string>

namespace tta {

enum class Strategy {
  no_adapt,        // softmax of the stored base logits, untouched
  pseudo_label,    // self-trained copy of the base classifier head
  prototype_only,  // cosine-to-prototype softmax over raw features, no training
  ours,            // transform ensemble + self-training + neighbor calibration
};

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

/// Per-run knobs. Field names describe the role; the CLI exposes them under
/// the short flag names users expect (--n-m, --n-t, ...).
struct StrategyConfig {
  Strategy strategy = Strategy::ours;

  std::size_t memory_capacity = 1000;  // bank size across all classes
  std::size_t n_layers = 5;            // transform layers in the ensemble
  std::size_t transform_dim = 0;       // output dim; 0 = half the feature dim
  std::size_t n_neighbors = 16;        // neighbors per calibration query
  double conf = 0.7;                   // confidence filter threshold
  double alpha = 0.1;                  // weight of the consistency term
  double lr = 1e-5;                    // Adam learning rate
  std::size_t k_steps = 1;             // parameter updates per batch
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  bool enable_lcpc_training = true;
  bool enable_nfc = true;
  bool predict_after_update = false;
  bool nfc_grad_through_neighbors = false;
  bool reset_optimizer_per_batch = false;
  bool identity_transform = false;  // single frozen identity layer (ablation)

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  /// One-line "key=value" echo for manifests and reports.
  std::string echo() const;
};

}  // namespace tta
