#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tta/error.hpp"

namespace tta {

using Vec64 = std::vector<double>;

/// Guard for zero norms and log(0).
inline constexpr double kEps = 1e-12;

/// Dense row-major matrix of doubles.
struct Mat64 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec64 values;

  Mat64() = default;
  Mat64(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
};

/// Discrete distribution over classes: entries in [0,1], summing to 1.
struct ProbDist {
  Vec64 probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t k) const { return probs[k]; }
  bool valid(double tol = 1e-9) const;
};

bool all_finite(std::span<const double> xs);

double dot(const Vec64& a, const Vec64& b);
double norm(const Vec64& a);

/// Index of the largest entry; lowest index wins ties.
std::size_t argmax(const Vec64& xs);

Vec64 matvec(const Mat64& m, const Vec64& x);
Vec64 copy_row(const Mat64& m, std::size_t r);

/// Max-subtracted softmax. Output sums to 1 within 1e-12 for any finite
/// input, including widely shifted logits.
ProbDist softmax(const Vec64& logits);

/// Shannon entropy (natural log) of softmax(logits), in [0, ln c].
double entropy(const Vec64& logits);

/// dot(a,b) / (max(||a||, eps) * max(||b||, eps)), clamped to [-1, 1].
double cosine_sim(const Vec64& a, const Vec64& b);

/// -sum_k target_k * log(max(pred_k, eps)).
double soft_cross_entropy(const ProbDist& target, const ProbDist& pred);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
/// Test oracle for hand-derived gradients.
Vec64 finite_diff_gradient(const std::function<double(const Vec64&)>& f,
                           const Vec64& x, double h);

/// Splitmix64-style mixer deriving an independent seed for sub-stream
/// `stream` of `seed`. Keeps component RNGs decoupled so adding a draw in
/// one place does not shift every other random quantity.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace tta
