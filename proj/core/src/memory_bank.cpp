#include "tta/memory_bank.hpp"

#include <algorithm>
#include <string>

namespace tta {

MemoryBank MemoryBank::init_from_classifier(const Mat64& weights,
                                            std::size_t capacity) {
  if (weights.rows < 2 || weights.cols < 1)
    throw ConfigError("memory bank: classifier weights must be at least 2x1");
  if (!all_finite(weights.values))
    throw ConfigError("memory bank: non-finite classifier weights");
  if (capacity < weights.rows)
    throw ConfigError("memory bank: capacity " + std::to_string(capacity) +
                      " below class count " + std::to_string(weights.rows));

  MemoryBank bank;
  bank.capacity_ = capacity;
  bank.feature_dim_ = weights.cols;
  bank.buckets_.resize(weights.rows);
  for (std::size_t k = 0; k < weights.rows; ++k) {
    BankEntry e;
    e.id = bank.next_id_++;
    e.feature = copy_row(weights, k);
    e.logits.assign(weights.rows, 0.0);
    e.logits[k] = kSeedLogitScale;
    e.entropy = entropy(e.logits);
    e.pred_class = k;
    e.is_seed = true;
    bank.buckets_[k].push_back(std::move(e));
  }
  return bank;
}

std::vector<std::uint64_t> MemoryBank::insert_batch(std::span<const Sample> batch) {
  for (const Sample& s : batch) {
    if (s.feature.size() != feature_dim_)
      throw ArgumentError("memory bank: feature length " +
                          std::to_string(s.feature.size()) + ", expected " +
                          std::to_string(feature_dim_));
    if (s.logits.size() != num_classes())
      throw ArgumentError("memory bank: logit length " +
                          std::to_string(s.logits.size()) + ", expected " +
                          std::to_string(num_classes()));
  }
  std::vector<std::uint64_t> ids;
  ids.reserve(batch.size());
  for (const Sample& s : batch) {
    BankEntry e;
    e.id = next_id_++;
    e.feature = s.feature;
    e.logits = s.logits;
    e.entropy = entropy(s.logits);
    e.pred_class = argmax(s.logits);
    ids.push_back(e.id);
    buckets_[e.pred_class].push_back(std::move(e));
  }
  enforce_capacity();
  return ids;
}

void MemoryBank::enforce_capacity() {
  const std::size_t per_class = std::max<std::size_t>(capacity_ / num_classes(), 1);
  for (auto& bucket : buckets_) {
    if (bucket.size() <= per_class) continue;
    // Keepability: lowest entropy first, newer entry wins entropy ties.
    std::sort(bucket.begin(), bucket.end(), [](const BankEntry& a, const BankEntry& b) {
      if (a.entropy != b.entropy) return a.entropy < b.entropy;
      return a.id > b.id;
    });
    bucket.resize(per_class);
    std::sort(bucket.begin(), bucket.end(),
              [](const BankEntry& a, const BankEntry& b) { return a.id < b.id; });
  }
}

Vec64 MemoryBank::class_prototype(std::size_t k) const {
  if (k >= num_classes())
    throw ArgumentError("memory bank: class index " + std::to_string(k) +
                        " out of range");
  const auto& bucket = buckets_[k];
  Vec64 mean(feature_dim_, 0.0);
  for (const BankEntry& e : bucket) {
    for (std::size_t i = 0; i < feature_dim_; ++i) mean[i] += e.feature[i];
  }
  for (double& m : mean) m /= static_cast<double>(bucket.size());
  return mean;
}

NeighborSet MemoryBank::nearest(const Vec64& query, std::size_t n,
                                std::optional<std::uint64_t> exclude_id) const {
  if (query.size() != feature_dim_)
    throw ArgumentError("memory bank: query length " + std::to_string(query.size()) +
                        ", expected " + std::to_string(feature_dim_));

  struct Scored {
    double distance;
    const BankEntry* entry;
  };
  std::vector<Scored> scored;
  scored.reserve(size());
  for (const auto& bucket : buckets_) {
    for (const BankEntry& e : bucket) {
      if (exclude_id && e.id == *exclude_id) continue;
      scored.push_back({1.0 - cosine_sim(query, e.feature), &e});
    }
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.entry->id < b.entry->id;
  });
  if (scored.size() > n) scored.resize(n);

  NeighborSet out;
  out.entries.reserve(scored.size());
  for (const Scored& s : scored) out.entries.push_back(s.entry);
  out.cutoff_distance = scored.empty() ? 0.0 : scored.back().distance;
  return out;
}

std::size_t MemoryBank::size() const {
  std::size_t total = 0;
  for (const auto& bucket : buckets_) total += bucket.size();
  return total;
}

std::size_t MemoryBank::class_count(std::size_t k) const {
  if (k >= num_classes())
    throw ArgumentError("memory bank: class index out of range");
  return buckets_[k].size();
}

std::vector<const BankEntry*> MemoryBank::entries() const {
  std::vector<const BankEntry*> all;
  all.reserve(size());
  for (const auto& bucket : buckets_) {
    for (const BankEntry& e : bucket) all.push_back(&e);
  }
  std::sort(all.begin(), all.end(),
            [](const BankEntry* a, const BankEntry* b) { return a->id < b->id; });
  return all;
}

}  // namespace tta
