#pragma once

#include <optional>

#include "tta/numerics.hpp"

namespace tta {

/// Label-blind view of one test sample. The adaptation path accepts only
/// this type, so ground truth cannot leak into it.
struct Sample {
  Vec64 feature;
  Vec64 logits;
};

/// Full record as stored in stream files. label -1 means unknown; labels
/// are visible only to the evaluation side.
struct FeatureRecord {
  Vec64 feature;
  Vec64 logits;
  int label = -1;
};

inline Sample strip_label(const FeatureRecord& r) { return {r.feature, r.logits}; }

/// Pull-based record source; strictly sequential, no rewind.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual std::optional<FeatureRecord> next() = 0;
};

class VectorSource final : public RecordSource {
 public:
  explicit VectorSource(std::vector<FeatureRecord> records)
      : records_(std::move(records)) {}

  std::optional<FeatureRecord> next() override {
    if (pos_ >= records_.size()) return std::nullopt;
    return records_[pos_++];
  }

 private:
  std::vector<FeatureRecord> records_;
  std::size_t pos_ = 0;
};

}  // namespace tta
