#pragma once

#include <span>

#include "tta/numerics.hpp"

namespace tta {

/// A sample's prediction before and after neighbor averaging.
struct CalibratedPrediction {
  ProbDist raw;
  ProbDist calibrated;
  std::size_t neighbor_count = 0;
};

/// Plain average of the sample's prediction with its neighbors':
/// (p + sum_n neighbor_preds[n]) / (n + 1). No neighbors leaves p unchanged.
CalibratedPrediction calibrate(const ProbDist& p,
                               std::span<const ProbDist> neighbor_preds);

/// Alignment penalty sum_n CE(neighbor_preds[n], p): each neighbor's
/// prediction acts as a soft target for the sample's own prediction.
double consistency_loss(const ProbDist& p,
                        std::span<const ProbDist> neighbor_preds);

}  // namespace tta
