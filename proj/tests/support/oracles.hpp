// Slow reference implementations used to cross-check the fast paths.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tta/numerics.hpp"

namespace oracle {

// AUC by direct pair counting: P(score_pos > score_neg) + 0.5 P(tie).
inline double auc_pairs(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / double(pairs);
}

// EER by exhaustive threshold sweep over every unique score, predicting
// positive at score >= theta, then linearly interpolating the FPR/FNR
// crossing between adjacent thresholds.
inline double eer_sweep(std::span<const double> scores, std::span<const int> labels) {
  std::vector<double> uniq(scores.begin(), scores.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  double n_pos = 0.0, n_neg = 0.0;
  for (int l : labels) (l == 1 ? n_pos : n_neg) += 1.0;

  auto rates = [&](double theta) {
    double fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      bool pred_pos = scores[i] >= theta;
      if (pred_pos && labels[i] == 0) fp += 1.0;
      if (!pred_pos && labels[i] == 1) fn += 1.0;
    }
    return std::pair{fp / n_neg, fn / n_pos};
  };

  // Thresholds from "accept everything" to "accept nothing": FPR falls,
  // FNR rises. Find the adjacent pair straddling FPR == FNR.
  std::vector<double> thetas;
  thetas.push_back(uniq.front() - 1.0);
  for (double u : uniq) thetas.push_back(u);
  thetas.push_back(uniq.back() + 1.0);

  double prev_fpr = 1.0, prev_fnr = 0.0;
  bool have_prev = false;
  for (double t : thetas) {
    auto [fpr, fnr] = rates(t);
    if (fnr >= fpr) {
      if (!have_prev) return (fpr + fnr) / 2.0;
      double d_prev = prev_fpr - prev_fnr;
      double d_cur = fnr - fpr;
      if (d_prev + d_cur < 1e-300) return (fpr + fnr) / 2.0;
      double w = d_prev / (d_prev + d_cur);
      double e_prev = (prev_fpr + prev_fnr) / 2.0;
      double e_cur = (fpr + fnr) / 2.0;
      return e_prev + w * (e_cur - e_prev);
    }
    prev_fpr = fpr;
    prev_fnr = fnr;
    have_prev = true;
  }
  return (prev_fpr + prev_fnr) / 2.0;
}

struct BruteNeighbor {
  std::uint64_t id;
  double distance;
};

// Brute-force kNN by cosine distance, ties broken by smaller id.
inline std::vector<BruteNeighbor> knn_brute(
    const tta::Vec64& query,
    const std::vector<std::pair<std::uint64_t, tta::Vec64>>& pool,
    std::size_t n, std::uint64_t exclude_id = std::numeric_limits<std::uint64_t>::max()) {
  std::vector<BruteNeighbor> all;
  for (const auto& [id, feat] : pool) {
    if (id == exclude_id) continue;
    all.push_back({id, 1.0 - tta::cosine_sim(query, feat)});
  }
  std::sort(all.begin(), all.end(), [](const BruteNeighbor& a, const BruteNeighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  if (all.size() > n) all.resize(n);
  return all;
}

}  // namespace oracle
