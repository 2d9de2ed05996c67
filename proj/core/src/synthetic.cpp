#include "tta/synthetic.hpp"

#include <cmath>
#include <random>

#include "tta/error.hpp"

namespace tta {
namespace {

// Cosine pattern scaled to the given magnitude; distinct phases give
// controlled angles between cluster directions regardless of d, and
// different harmonics are mutually orthogonal.
Vec64 pattern(std::size_t d, double phase, double magnitude, int harmonic = 1) {
  Vec64 v(d);
  double nrm = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    v[j] = std::cos(2.0 * M_PI * (phase + double(harmonic) * double(j) / double(d)));
    nrm += v[j] * v[j];
  }
  nrm = std::sqrt(nrm);
  for (double& x : v) x = magnitude * x / (nrm > 0.0 ? nrm : 1.0);
  return v;
}

Vec64 vec_sum(Vec64 a, const Vec64& b) {
  for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
  return a;
}

void check_vec(const Vec64& v, std::size_t d, const char* name) {
  if (v.size() != d) throw ConfigError(std::string("synth: ") + name + " has wrong dim");
  if (!all_finite(v)) throw ConfigError(std::string("synth: ") + name + " not finite");
}

FeatureRecord draw_record(std::mt19937_64& rng, const Vec64& mean, double scale,
                          int label, const Vec64* shift, std::size_t n_classes) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureRecord r;
  r.feature.reserve(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j) {
    double x = mean[j] + scale * gauss(rng);
    if (shift) x += (*shift)[j];
    r.feature.push_back(quantize_to_f32(x));
  }
  r.logits.assign(n_classes, 0.0);
  r.label = label;
  return r;
}

}  // namespace

SynthConfig SynthConfig::benchmark_default(std::uint64_t seed, std::size_t d) {
  if (d == 0) throw ConfigError("synth: d must be positive");
  SynthConfig cfg;
  cfg.d = d;
  cfg.n_source = 4000;
  cfg.n_target = 2000;
  // Real at phase 0 with two known forgery modes flanking it. The novel
  // mode combines a first-harmonic component that nearly matches the real
  // cluster's projection onto the source-trained discriminant (so the
  // frozen detector scores it like a real sample) with a strong
  // second-harmonic component pointing out of the plane the detector was
  // trained in (so direction-based scoring still tells them apart). Its
  // spread is kept tight so the entropy filter retires novel entries
  // before they crowd out genuine real entries in the bank.
  cfg.real_mean = pattern(cfg.d, 0.00, 3.0);
  cfg.fake_mean_a = pattern(cfg.d, 0.35, 3.0);
  cfg.fake_mean_b = pattern(cfg.d, 0.65, 3.0);
  cfg.novel_mean =
      vec_sum(pattern(cfg.d, 0.00, 2.86), pattern(cfg.d, 0.10, 9.0, 2));
  cfg.shift = pattern(cfg.d, 0.12, 1.0);
  cfg.real_scale = 0.30;
  cfg.fake_scale = 0.30;
  cfg.novel_scale = 0.13;
  cfg.fake_fraction = 0.5;
  cfg.novel_weight = 0.5;
  cfg.seed = seed;
  cfg.set_shift_magnitude(0.8);
  return cfg;
}

void SynthConfig::set_shift_magnitude(double magnitude) {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude))
    throw ConfigError("synth: shift magnitude must be finite and nonnegative");
  const double cur = norm(shift);
  if (cur <= 0.0) {
    shift = pattern(d, 0.12, magnitude);
    return;
  }
  for (double& x : shift) x *= magnitude / cur;
}

void SynthConfig::validate() const {
  if (d == 0) throw ConfigError("synth: d must be positive");
  if (n_source == 0 || n_target == 0)
    throw ConfigError("synth: sample counts must be positive");
  check_vec(real_mean, d, "real mean");
  check_vec(fake_mean_a, d, "fake mean A");
  check_vec(fake_mean_b, d, "fake mean B");
  check_vec(novel_mean, d, "novel mean");
  check_vec(shift, d, "shift");
  for (double s : {real_scale, fake_scale, novel_scale}) {
    if (!(s > 0.0) || !std::isfinite(s))
      throw ConfigError("synth: scales must be finite and positive");
  }
  if (!(fake_fraction > 0.0 && fake_fraction < 1.0))
    throw ConfigError("synth: fake fraction must lie in (0, 1)");
  if (!(novel_weight >= 0.0 && novel_weight <= 1.0))
    throw ConfigError("synth: novel weight must lie in [0, 1]");
}

SynthStreams generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SynthStreams out;
  const std::uint32_t stream_d = std::uint32_t(cfg.d);

  auto make_header = [&](std::uint64_t n) {
    StreamHeader h;
    h.d = stream_d;
    h.c = 2;
    h.positive_class = 1;
    h.record_count = n;
    return h;
  };
  out.source.header = make_header(cfg.n_source);
  out.target.header = make_header(cfg.n_target);

  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::mt19937_64 src_rng(mix_seed(cfg.seed, 1));
  out.source.records.reserve(cfg.n_source);
  for (std::size_t i = 0; i < cfg.n_source; ++i) {
    if (uni(src_rng) < cfg.fake_fraction) {
      const bool mode_a = uni(src_rng) < 0.5;
      out.source.records.push_back(draw_record(
          src_rng, mode_a ? cfg.fake_mean_a : cfg.fake_mean_b, cfg.fake_scale,
          1, nullptr, 2));
    } else {
      out.source.records.push_back(
          draw_record(src_rng, cfg.real_mean, cfg.real_scale, 0, nullptr, 2));
    }
  }

  std::mt19937_64 tgt_rng(mix_seed(cfg.seed, 2));
  out.target.records.reserve(cfg.n_target);
  for (std::size_t i = 0; i < cfg.n_target; ++i) {
    if (uni(tgt_rng) < cfg.fake_fraction) {
      const double pick = uni(tgt_rng);
      if (pick < cfg.novel_weight) {
        out.target.records.push_back(draw_record(
            tgt_rng, cfg.novel_mean, cfg.novel_scale, 1, &cfg.shift, 2));
      } else {
        const bool mode_a = uni(tgt_rng) < 0.5;
        out.target.records.push_back(draw_record(
            tgt_rng, mode_a ? cfg.fake_mean_a : cfg.fake_mean_b, cfg.fake_scale,
            1, &cfg.shift, 2));
      }
    } else {
      out.target.records.push_back(
          draw_record(tgt_rng, cfg.real_mean, cfg.real_scale, 0, &cfg.shift, 2));
    }
  }
  return out;
}

}  // namespace tta
