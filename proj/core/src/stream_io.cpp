#include "tta/stream_io.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "tta/error.hpp"

namespace tta {
namespace {

constexpr char kStreamMagic[4] = {'F', 'T', 'S', '1'};
constexpr char kWeightsMagic[4] = {'F', 'T', 'W', '1'};
constexpr std::uint32_t kVersion = 1;

// Byte-level little-endian packing, independent of host endianness.
void put_u32(std::string& buf, std::uint32_t v) {
  buf.push_back(char(v & 0xFF));
  buf.push_back(char((v >> 8) & 0xFF));
  buf.push_back(char((v >> 16) & 0xFF));
  buf.push_back(char((v >> 24) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& buf, double x) {
  put_u32(buf, std::bit_cast<std::uint32_t>(float(x)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

double get_f32(const unsigned char* p) {
  return double(std::bit_cast<float>(get_u32(p)));
}

void read_exact(std::istream& in, char* dst, std::size_t n,
                const std::string& what) {
  in.read(dst, std::streamsize(n));
  if (std::size_t(in.gcount()) != n)
    throw FormatError("truncated file while reading " + what);
}

StreamHeader read_stream_header(std::istream& in, const char expect_magic[4],
                                const std::string& path) {
  char raw[28];
  read_exact(in, raw, sizeof raw, "header of " + path);
  if (std::memcmp(raw, expect_magic, 4) != 0)
    throw FormatError(path + ": bad magic");
  const auto* p = reinterpret_cast<const unsigned char*>(raw);
  StreamHeader h;
  h.version = get_u32(p + 4);
  if (h.version != kVersion)
    throw FormatError(path + ": unsupported version " + std::to_string(h.version));
  h.d = get_u32(p + 8);
  h.c = get_u32(p + 12);
  h.positive_class = get_u32(p + 16);
  h.record_count = get_u64(p + 20);
  if (h.d == 0 || h.c == 0 || h.positive_class >= h.c)
    throw FormatError(path + ": invalid header dimensions");
  return h;
}

void check_header(const StreamHeader& h, std::span<const FeatureRecord> records) {
  if (h.d == 0 || h.c == 0) throw ArgumentError("write_stream: zero dimensions");
  if (h.positive_class >= h.c)
    throw ArgumentError("write_stream: positive class out of range");
  if (h.record_count != records.size())
    throw ArgumentError("write_stream: header count does not match records");
  for (const auto& r : records) {
    if (r.feature.size() != h.d || r.logits.size() != h.c)
      throw ArgumentError("write_stream: record dims do not match header");
  }
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

double quantize_to_f32(double x) { return double(float(x)); }

void write_stream(const std::string& path, const StreamHeader& header,
                  std::span<const FeatureRecord> records) {
  check_header(header, records);
  std::string buf;
  buf.reserve(24 + records.size() * (4 * (header.d + header.c) + 1));
  buf.append(kStreamMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, header.d);
  put_u32(buf, header.c);
  put_u32(buf, header.positive_class);
  put_u64(buf, header.record_count);
  for (const auto& r : records) {
    for (double f : r.feature) put_f32(buf, f);
    for (double l : r.logits) put_f32(buf, l);
    buf.push_back(char(static_cast<signed char>(r.label)));
  }
  write_file(path, buf);
}

StreamReader::StreamReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open stream: " + path);
  header_ = read_stream_header(in_, kStreamMagic, path);
}

std::optional<FeatureRecord> StreamReader::next() {
  if (read_ >= header_.record_count) return std::nullopt;
  const std::size_t n_bytes = 4 * (header_.d + header_.c) + 1;
  std::vector<char> raw(n_bytes);
  in_.read(raw.data(), std::streamsize(n_bytes));
  if (std::size_t(in_.gcount()) != n_bytes)
    throw FormatError(path_ + ": truncated at record " + std::to_string(read_));
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  FeatureRecord r;
  r.feature.resize(header_.d);
  r.logits.resize(header_.c);
  for (std::uint32_t i = 0; i < header_.d; ++i) r.feature[i] = get_f32(p + 4 * i);
  for (std::uint32_t i = 0; i < header_.c; ++i)
    r.logits[i] = get_f32(p + 4 * (header_.d + i));
  r.label = int(static_cast<signed char>(raw[n_bytes - 1]));
  ++read_;
  return r;
}

void write_csv_stream(const std::string& path, const StreamHeader& header,
                      std::span<const FeatureRecord> records) {
  check_header(header, records);
  std::ostringstream os;
  os.precision(9);  // enough to round-trip any 32-bit float
  os << header.d << "," << header.c << "," << header.positive_class << "\n";
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.feature.size(); ++i)
      os << (i ? "," : "") << float(r.feature[i]);
    for (double l : r.logits) os << "," << float(l);
    os << "," << r.label << "\n";
  }
  write_file(path, os.str());
}

StreamData read_csv_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stream: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");

  auto split = [&](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
  };

  const auto head = split(line);
  if (head.size() != 3) throw FormatError(path + ": header must be d,c,positive_class");
  StreamData data;
  try {
    data.header.d = std::uint32_t(std::stoul(head[0]));
    data.header.c = std::uint32_t(std::stoul(head[1]));
    data.header.positive_class = std::uint32_t(std::stoul(head[2]));
  } catch (const std::exception&) {
    throw FormatError(path + ": malformed header line");
  }
  if (data.header.d == 0 || data.header.c == 0 ||
      data.header.positive_class >= data.header.c)
    throw FormatError(path + ": invalid header dimensions");

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line);
    const std::size_t want = data.header.d + data.header.c + 1;
    if (fields.size() != want)
      throw FormatError(path + ": row " + std::to_string(row) + " has " +
                        std::to_string(fields.size()) + " fields, want " +
                        std::to_string(want));
    FeatureRecord r;
    try {
      for (std::uint32_t i = 0; i < data.header.d; ++i)
        r.feature.push_back(quantize_to_f32(std::stod(fields[i])));
      for (std::uint32_t i = 0; i < data.header.c; ++i)
        r.logits.push_back(quantize_to_f32(std::stod(fields[data.header.d + i])));
      r.label = std::stoi(fields[want - 1]);
    } catch (const std::exception&) {
      throw FormatError(path + ": malformed value in row " + std::to_string(row));
    }
    data.records.push_back(std::move(r));
    ++row;
  }
  data.header.record_count = data.records.size();
  return data;
}

StreamData load_stream(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return read_csv_stream(path);
  StreamReader reader(path);
  StreamData data;
  data.header = reader.header();
  data.records.reserve(data.header.record_count);
  while (auto r = reader.next()) data.records.push_back(std::move(*r));
  return data;
}

void write_weights(const std::string& path, const Mat64& weights,
                   std::uint32_t positive_class) {
  if (weights.rows == 0 || weights.cols == 0)
    throw ArgumentError("write_weights: empty matrix");
  if (positive_class >= weights.rows)
    throw ArgumentError("write_weights: positive class out of range");
  if (!all_finite(weights.values))
    throw ArgumentError("write_weights: non-finite weights");
  std::string buf;
  buf.append(kWeightsMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, std::uint32_t(weights.cols));
  put_u32(buf, std::uint32_t(weights.rows));
  put_u32(buf, positive_class);
  put_u64(buf, 0);  // no records follow, header kept stream-shaped
  for (double w : weights.values) put_f32(buf, w);
  write_file(path, buf);
}

ClassifierFile read_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights: " + path);
  const StreamHeader h = read_stream_header(in, kWeightsMagic, path);
  ClassifierFile out;
  out.positive_class = h.positive_class;
  out.weights = Mat64(h.c, h.d);
  const std::size_t n_bytes = 4 * std::size_t(h.c) * h.d;
  std::vector<char> raw(n_bytes);
  read_exact(in, raw.data(), n_bytes, "weight matrix of " + path);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  for (std::size_t i = 0; i < out.weights.values.size(); ++i)
    out.weights.values[i] = get_f32(p + 4 * i);
  return out;
}

}  // namespace tta
