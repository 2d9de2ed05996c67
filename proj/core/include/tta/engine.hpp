#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tta/adam.hpp"
#include "tta/config.hpp"
#include "tta/lcpc.hpp"
#include "tta/memory_bank.hpp"
#include "tta/metrics.hpp"
#include "tta/nfc.hpp"
#include "tta/record.hpp"

namespace tta {

/// What the most recent batch's adaptation phase did.
struct BatchDiagnostics {
  LossTerms loss;
  std::size_t steps_run = 0;
  bool trained = false;
  bool skipped_non_finite = false;  // training aborted, predictions kept
};

/// Online adaptation loop around a frozen classifier. One instance
/// processes one stream strictly in order; the base detector's weights are
/// only read, never written.
class Engine {
 public:
  Engine(const Mat64& classifier_weights, const StrategyConfig& config);

  /// One online step. Under `ours`: insert into the bank, predict and
  /// calibrate with the current ensemble, then take the configured number
  /// of update steps. Returned predictions are the pre-update ones unless
  /// predict_after_update is set. Batches carry no labels by construction.
  std::vector<CalibratedPrediction> process_batch(std::span<const Sample> batch);

  const StrategyConfig& config() const { return cfg_; }
  const MemoryBank& bank() const { return bank_; }
  const TransformEnsemble& ensemble() const { return ensemble_; }
  const Mat64& pseudo_label_head() const { return pl_head_; }
  const BatchDiagnostics& last_batch() const { return last_; }
  std::size_t samples_seen() const { return samples_seen_; }

 private:
  std::vector<CalibratedPrediction> batch_no_adapt(std::span<const Sample> batch);
  std::vector<CalibratedPrediction> batch_pseudo_label(std::span<const Sample> batch);
  std::vector<CalibratedPrediction> batch_prototype_only(std::span<const Sample> batch);
  std::vector<CalibratedPrediction> batch_ours(std::span<const Sample> batch);

  std::vector<Vec64> current_prototypes() const;
  std::vector<CalibratedPrediction> predict_calibrated(
      std::span<const Sample> batch, const std::vector<Vec64>& prototypes,
      const std::vector<std::vector<Vec64>>& neighbor_features) const;
  void train_steps(std::span<const Sample> batch,
                   const std::vector<Vec64>& prototypes,
                   const std::vector<std::vector<Vec64>>& neighbor_features);

  StrategyConfig cfg_;
  MemoryBank bank_;
  TransformEnsemble ensemble_;
  AdamState adam_;
  Mat64 pl_head_;  // pseudo_label's trainable copy; the original stays frozen
  AdamState pl_adam_;
  BatchDiagnostics last_;
  std::size_t samples_seen_ = 0;
};

/// Partitions the stream into batches, runs the engine, and collects the
/// positive-class calibrated probability per sample. Metrics appear in the
/// report only when every record carried a label.
EvaluationReport run_stream(const StrategyConfig& cfg,
                            const Mat64& classifier_weights, RecordSource& stream,
                            std::uint32_t positive_class);

}  // namespace tta
