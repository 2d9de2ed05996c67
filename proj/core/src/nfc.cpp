#include "tta/nfc.hpp"

#include "tta/error.hpp"

namespace tta {

CalibratedPrediction calibrate(const ProbDist& p,
                               std::span<const ProbDist> neighbor_preds) {
  const std::size_t c = p.size();
  if (c == 0) throw ArgumentError("calibrate: empty prediction");
  CalibratedPrediction out;
  out.raw = p;
  out.neighbor_count = neighbor_preds.size();
  Vec64 acc = p.probs;
  for (const ProbDist& q : neighbor_preds) {
    if (q.size() != c) throw ArgumentError("calibrate: class-count mismatch");
    for (std::size_t k = 0; k < c; ++k) acc[k] += q[k];
  }
  const double denom = double(neighbor_preds.size() + 1);
  for (double& x : acc) x /= denom;
  out.calibrated = ProbDist{std::move(acc)};
  return out;
}

double consistency_loss(const ProbDist& p,
                        std::span<const ProbDist> neighbor_preds) {
  double sum = 0.0;
  for (const ProbDist& q : neighbor_preds) {
    if (q.size() != p.size())
      throw ArgumentError("consistency_loss: class-count mismatch");
    sum += soft_cross_entropy(q, p);
  }
  return sum;
}

}  // namespace tta
