#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tta/numerics.hpp"
#include "tta/record.hpp"

namespace tta {

/// The frozen classifier head of an upstream detector. The feature
/// extractor stays on the other side of the stream boundary; this side
/// only ever sees features, logits, and these weights.
struct BaseDetector {
  Mat64 weights;  // c x d
  std::uint32_t positive_class = 1;

  Vec64 logits_for(const Vec64& feature) const;

  /// Fill in each record's logits from its feature.
  void annotate(std::vector<FeatureRecord>& records) const;
};

struct BaseTrainResult {
  BaseDetector detector;
  double train_accuracy = 0.0;
  double final_loss = 0.0;
};

/// Full-batch gradient descent on softmax cross-entropy over the labeled
/// source records. Weights are rounded to 32-bit float precision at the end
/// so the in-memory detector matches its on-disk form exactly.
BaseTrainResult train_base_detector(std::span<const FeatureRecord> source,
                                    std::size_t n_classes, std::size_t epochs,
                                    double lr, std::uint64_t seed);

}  // namespace tta
