#include "tta/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tta {

bool ProbDist::valid(double tol) const {
  if (probs.empty()) return false;
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < -tol || p > 1.0 + tol) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double dot(const Vec64& a, const Vec64& b) {
  if (a.size() != b.size()) throw ArgumentError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec64& a) { return std::sqrt(dot(a, a)); }

std::size_t argmax(const Vec64& xs) {
  if (xs.empty()) throw ArgumentError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] > xs[best]) best = i;
  }
  return best;
}

Vec64 matvec(const Mat64& m, const Vec64& x) {
  if (m.cols != x.size()) throw ArgumentError("matvec: shape mismatch");
  Vec64 y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.values.data() + r * m.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

Vec64 copy_row(const Mat64& m, std::size_t r) {
  if (r >= m.rows) throw ArgumentError("copy_row: row out of range");
  auto span = m.row(r);
  return Vec64(span.begin(), span.end());
}

ProbDist softmax(const Vec64& logits) {
  if (logits.empty()) throw ArgumentError("softmax: empty input");
  if (!all_finite(logits)) throw ArgumentError("softmax: non-finite input");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec64 out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return ProbDist{std::move(out)};
}

double entropy(const Vec64& logits) {
  const ProbDist p = softmax(logits);
  double h = 0.0;
  for (double q : p.probs) {
    if (q > 0.0) h -= q * std::log(q);
  }
  return std::max(h, 0.0);
}

double cosine_sim(const Vec64& a, const Vec64& b) {
  if (a.size() != b.size()) throw ArgumentError("cosine_sim: length mismatch");
  const double na = std::max(norm(a), kEps);
  const double nb = std::max(norm(b), kEps);
  const double s = dot(a, b) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

double soft_cross_entropy(const ProbDist& target, const ProbDist& pred) {
  if (target.size() != pred.size())
    throw ArgumentError("soft_cross_entropy: length mismatch");
  double ce = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    ce -= target[k] * std::log(std::max(pred[k], kEps));
  }
  return std::max(ce, 0.0);
}

Vec64 finite_diff_gradient(const std::function<double(const Vec64&)>& f,
                           const Vec64& x, double h) {
  if (h <= 0.0) throw ArgumentError("finite_diff_gradient: h must be positive");
  Vec64 g(x.size());
  Vec64 probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + h;
    const double fp = f(probe);
    probe[i] = xi - h;
    const double fm = f(probe);
    probe[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_gradient: non-finite value at coordinate " +
                         std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace tta
