#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "tta/numerics.hpp"
#include "tta/record.hpp"

namespace tta {

/// On-disk header of a feature stream. Values are stored little-endian;
/// features and logits are 32-bit floats widened to doubles on read.
struct StreamHeader {
  std::uint32_t version = 1;
  std::uint32_t d = 0;
  std::uint32_t c = 0;
  std::uint32_t positive_class = 0;
  std::uint64_t record_count = 0;
};

/// A fully loaded stream, for generators, fixtures, and tests.
struct StreamData {
  StreamHeader header;
  std::vector<FeatureRecord> records;
};

/// Round a double through 32-bit float precision — the value a record will
/// hold after a write/read cycle.
double quantize_to_f32(double x);

void write_stream(const std::string& path, const StreamHeader& header,
                  std::span<const FeatureRecord> records);

/// Sequential single-pass reader over an FTS1 file.
class StreamReader : public RecordSource {
 public:
  explicit StreamReader(const std::string& path);

  const StreamHeader& header() const { return header_; }
  std::optional<FeatureRecord> next() override;

 private:
  std::ifstream in_;
  std::string path_;
  StreamHeader header_;
  std::uint64_t read_ = 0;
};

/// Text fixture format: first line "d,c,positive_class", then one record
/// per line "f_0,...,f_{d-1},l_0,...,l_{c-1},label".
void write_csv_stream(const std::string& path, const StreamHeader& header,
                      std::span<const FeatureRecord> records);
StreamData read_csv_stream(const std::string& path);

/// Loads a whole stream; picks the CSV parser for paths ending in ".csv",
/// the binary one otherwise.
StreamData load_stream(const std::string& path);

/// Frozen classifier weights (c rows of d columns) with the stream-style
/// header in front.
struct ClassifierFile {
  Mat64 weights;
  std::uint32_t positive_class = 0;
};

void write_weights(const std::string& path, const Mat64& weights,
                   std::uint32_t positive_class);
ClassifierFile read_weights(const std::string& path);

}  // namespace tta
