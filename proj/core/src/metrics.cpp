#include "tta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tta/error.hpp"

namespace tta {
namespace {

void check_lengths(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ArgumentError("metrics: score/label length mismatch");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) {
    if (l == 1) ++n_pos;
    else if (l == 0) ++n_neg;
    else throw ArgumentError("metrics: labels must be 0 or 1");
  }
  return {n_pos, n_neg};
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores, labels);
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0)
    throw MetricError("auc: needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // midranks: tied scores all receive the average of their rank range
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * double(i + 1 + j + 1);  // ranks are 1-based
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  return (rank_sum_pos - 0.5 * double(n_pos) * double(n_pos + 1)) /
         (double(n_pos) * double(n_neg));
}

double acc(std::span<const double> scores, std::span<const int> labels,
           double threshold) {
  check_lengths(scores, labels);
  if (scores.empty()) throw ArgumentError("acc: empty input");
  class_counts(labels);  // validates label values
  std::size_t correct = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const int pred = scores[k] > threshold ? 1 : 0;
    if (pred == labels[k]) ++correct;
  }
  return double(correct) / double(scores.size());
}

double eer(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores, labels);
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0)
    throw MetricError("eer: needs both classes present");

  // Sort descending once, then walk thresholds from the smallest score to a
  // sentinel above the largest; cumulative counts give FPR/FNR per threshold.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // At threshold t: predict positive iff score >= t.
  // Walking t upward through unique score values, samples peel off the
  // predicted-positive set as t passes them.
  double fp = double(n_neg);  // predicted-positive negatives at t = min score
  double fn = 0.0;            // predicted-negative positives
  double prev_fpr = 1.0, prev_fnr = 0.0;
  std::size_t i = 0;
  while (true) {
    const double fpr = fp / double(n_neg);
    const double fnr = fn / double(n_pos);
    const double g = fpr - fnr;
    if (g == 0.0) return fpr;
    if (g < 0.0) {
      // crossed between the previous threshold and this one
      const double g_prev = prev_fpr - prev_fnr;
      const double t = g_prev / (g_prev - g);
      return prev_fpr + t * (fpr - prev_fpr);
    }
    prev_fpr = fpr;
    prev_fnr = fnr;
    if (i >= order.size()) break;  // unreachable: sentinel gives g = -1
    // advance past the tie group at the current threshold value
    const double v = scores[order[i]];
    while (i < order.size() && scores[order[i]] == v) {
      if (labels[order[i]] == 1) fn += 1.0;
      else fp -= 1.0;
      ++i;
    }
  }
  throw MetricError("eer: no FPR/FNR crossing found");
}

}  // namespace tta
