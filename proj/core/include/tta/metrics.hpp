#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tta {

/// Area under the ROC curve via the Mann-Whitney rank statistic: the
/// probability that a random positive outranks a random negative, ties at
/// half credit. Requires both classes present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Fraction of samples with (score > threshold) matching the label.
/// A score exactly at the threshold counts as a negative prediction.
double acc(std::span<const double> scores, std::span<const int> labels,
           double threshold = 0.5);

/// Equal error rate: sweep thresholds over the sorted unique scores
/// (predict positive at score >= threshold), locate the FPR/FNR crossing,
/// and interpolate linearly between the bracketing thresholds.
double eer(std::span<const double> scores, std::span<const int> labels);

/// End-of-stream evaluation summary. Metrics are set only when ground-truth
/// labels were available.
struct EvaluationReport {
  std::vector<std::pair<std::size_t, double>> per_sample_scores;
  std::optional<double> auc;
  std::optional<double> acc;
  std::optional<double> eer;
  std::string strategy;
  std::string config_echo;
  double seconds_per_batch = 0.0;
};

}  // namespace tta
