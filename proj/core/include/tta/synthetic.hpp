#pragma once

#include <cstdint>

#include "tta/numerics.hpp"
#include "tta/stream_io.hpp"

namespace tta {

/// Gaussian-mixture domain-shift benchmark. The source domain has a "real"
/// class and a "fake" class made of two known sub-clusters; the target
/// domain translates everything by `shift` and mixes in a novel fake
/// sub-cluster that the source never contained.
struct SynthConfig {
  std::size_t d = 16;          // feature dim
  std::size_t n_source = 4000;
  std::size_t n_target = 2000;

  Vec64 real_mean;             // class 0 center
  Vec64 fake_mean_a;           // class 1, known mode A
  Vec64 fake_mean_b;           // class 1, known mode B
  Vec64 novel_mean;            // class 1, unseen mode (target only)
  Vec64 shift;                 // translation applied to every target sample

  double real_scale = 1.0;     // per-coordinate stddev
  double fake_scale = 1.0;
  double novel_scale = 1.0;

  double fake_fraction = 0.5;  // fraction of fakes in each domain
  double novel_weight = 0.5;   // fraction of target fakes from the novel mode

  std::uint64_t seed = 0;

  /// The frozen benchmark geometry used by the acceptance tests, with the
  /// scalar knobs (shift magnitude, novel weight) still overridable. The
  /// cluster directions are fixed phase patterns, so any dimension works.
  static SynthConfig benchmark_default(std::uint64_t seed, std::size_t d = 16);

  /// Scale `shift` to the given Euclidean magnitude, keeping direction.
  void set_shift_magnitude(double magnitude);

  void validate() const;  // throws ConfigError
};

struct SynthStreams {
  StreamData source;  // labeled, logits zero until a detector annotates them
  StreamData target;
};

/// Draws both domains. All values are pre-rounded to 32-bit float precision,
/// so in-memory data equals what a write/read cycle would produce.
SynthStreams generate_synthetic(const SynthConfig& cfg);

}  // namespace tta
