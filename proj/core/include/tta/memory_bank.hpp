#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tta/numerics.hpp"
#include "tta/record.hpp"

namespace tta {

/// Logit scale for seed entries built from classifier weight rows. A
/// one-hot scaled this far has entropy ~4.3e-8, so seeds sort behind any
/// real evidence in entropy eviction without being formally protected.
inline constexpr double kSeedLogitScale = 20.0;

struct BankEntry {
  std::uint64_t id = 0;
  Vec64 feature;
  Vec64 logits;
  double entropy = 0.0;        // cached H(logits)
  std::size_t pred_class = 0;  // argmax(logits), lowest index on ties
  bool is_seed = false;
};

/// Result of a nearest() query, closest first. Entry pointers stay valid
/// until the next mutating call on the bank.
struct NeighborSet {
  std::vector<const BankEntry*> entries;
  double cutoff_distance = 0.0;  // cosine distance of the last returned entry
};

/// Bounded store of past (feature, logits) evidence, bucketed by predicted
/// class. Eviction keeps the floor(capacity / classes) lowest-entropy
/// entries per class; a class is never emptied.
class MemoryBank {
 public:
  /// Seeds one entry per class from the classifier weight rows.
  static MemoryBank init_from_classifier(const Mat64& weights, std::size_t capacity);

  /// Appends one entry per sample (ids in arrival order), then enforces
  /// capacity. Returns the assigned ids.
  std::vector<std::uint64_t> insert_batch(std::span<const Sample> batch);

  /// Per-class entropy eviction; idempotent.
  void enforce_capacity();

  /// Mean feature of entries predicted as class k.
  Vec64 class_prototype(std::size_t k) const;

  /// The n closest entries to query by cosine distance (1 - cosine
  /// similarity), optionally excluding one entry by id. Ties broken by
  /// smaller id.
  NeighborSet nearest(const Vec64& query, std::size_t n,
                      std::optional<std::uint64_t> exclude_id = std::nullopt) const;

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::size_t num_classes() const { return buckets_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t class_count(std::size_t k) const;

  /// All entries in id order. Pointers valid until the next mutation.
  std::vector<const BankEntry*> entries() const;

 private:
  MemoryBank() = default;

  std::vector<std::vector<BankEntry>> buckets_;
  std::size_t capacity_ = 0;
  std::size_t feature_dim_ = 0;
  std::uint64_t next_id_ = 0;
};

}  // namespace tta
