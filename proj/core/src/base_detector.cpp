#include "tta/base_detector.hpp"

#include <cmath>
#include <random>
#include <set>

#include "tta/error.hpp"
#include "tta/stream_io.hpp"

namespace tta {

Vec64 BaseDetector::logits_for(const Vec64& feature) const {
  if (feature.size() != weights.cols)
    throw ArgumentError("base detector: feature dim does not match weights");
  return matvec(weights, feature);
}

void BaseDetector::annotate(std::vector<FeatureRecord>& records) const {
  for (auto& r : records) {
    Vec64 logits = logits_for(r.feature);
    for (double& l : logits) l = quantize_to_f32(l);
    r.logits = std::move(logits);
  }
}

BaseTrainResult train_base_detector(std::span<const FeatureRecord> source,
                                    std::size_t n_classes, std::size_t epochs,
                                    double lr, std::uint64_t seed) {
  if (source.empty()) throw ArgumentError("train_base_detector: no records");
  if (n_classes < 2) throw ArgumentError("train_base_detector: need >= 2 classes");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw ArgumentError("train_base_detector: lr must be finite and positive");
  const std::size_t d = source[0].feature.size();
  std::set<int> seen;
  for (const auto& r : source) {
    if (r.feature.size() != d)
      throw ArgumentError("train_base_detector: inconsistent feature dims");
    if (r.label < 0 || std::size_t(r.label) >= n_classes)
      throw ArgumentError("train_base_detector: label out of range");
    seen.insert(r.label);
  }
  if (seen.size() < 2)
    throw ArgumentError("train_base_detector: source data has a single class");

  BaseTrainResult out;
  Mat64& w = out.detector.weights;
  w = Mat64(n_classes, d);
  std::mt19937_64 rng(mix_seed(seed, 3));
  std::normal_distribution<double> gauss(0.0, 0.01);
  for (double& x : w.values) x = gauss(rng);

  const double n = double(source.size());
  Mat64 grad(n_classes, d);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::fill(grad.values.begin(), grad.values.end(), 0.0);
    double loss = 0.0;
    for (const auto& r : source) {
      const ProbDist p = softmax(matvec(w, r.feature));
      loss -= std::log(std::max(p[std::size_t(r.label)], kEps));
      for (std::size_t k = 0; k < n_classes; ++k) {
        const double delta = p[k] - (std::size_t(r.label) == k ? 1.0 : 0.0);
        if (delta == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) grad.at(k, j) += delta * r.feature[j];
      }
    }
    for (std::size_t i = 0; i < w.values.size(); ++i)
      w.values[i] -= lr * grad.values[i] / n;
    out.final_loss = loss / n;
    if (!all_finite(w.values))
      throw NumericError("train_base_detector: weights diverged at epoch " +
                         std::to_string(e));
  }

  // round to the precision the weights file will hold
  for (double& x : w.values) x = quantize_to_f32(x);

  std::size_t correct = 0;
  for (const auto& r : source) {
    if (argmax(matvec(w, r.feature)) == std::size_t(r.label)) ++correct;
  }
  out.train_accuracy = double(correct) / n;
  return out;
}

}  // namespace tta
