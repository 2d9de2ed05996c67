#pragma once

#include <cstdint>
#include <span>

#include "tta/numerics.hpp"

namespace tta {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one flat parameter vector. State persists for
/// the whole stream by default; callers may reset() per batch.
struct AdamState {
  AdamConfig config;
  Vec64 m;  // first moment
  Vec64 v;  // second moment
  std::uint64_t t = 0;

  explicit AdamState(std::size_t n, AdamConfig cfg = {})
      : config(cfg), m(n, 0.0), v(n, 0.0) {}

  void reset() {
    std::fill(m.begin(), m.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    t = 0;
  }
};

/// In-place bias-corrected Adam update. Throws NumericError on non-finite
/// gradients without touching parameters or state.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state);

}  // namespace tta
