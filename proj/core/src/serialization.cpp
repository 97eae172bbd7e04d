#include "cpml/serialization.hpp"

#include <cstring>
#include <string>

namespace cpml::serialization {

void write_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_u32_le(const std::uint8_t* p) noexcept {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

void write_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_u32_be(const std::uint8_t* p) noexcept {
  return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 | std::uint32_t{p[3]};
}

void append_matrix(std::vector<std::uint8_t>& out, const field::FieldMatrix& m) {
  out.reserve(out.size() + kShareHeaderSize + 4 * m.size());
  out.insert(out.end(), {'L', 'C', 'P', 'M'});
  write_u32_le(out, kShareFormatVersion);
  write_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  write_u32_le(out, static_cast<std::uint32_t>(m.cols()));
  for (std::uint32_t v : m.data()) write_u32_le(out, v);
}

std::vector<std::uint8_t> serialize_matrix(const field::FieldMatrix& m) {
  std::vector<std::uint8_t> out;
  append_matrix(out, m);
  return out;
}

field::FieldMatrix parse_matrix(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  if (bytes.size() < kShareHeaderSize) throw FormatError("share shorter than its 16-byte header");
  if (std::memcmp(bytes.data(), "LCPM", 4) != 0) throw FormatError("bad share magic");
  const std::uint32_t version = read_u32_le(bytes.data() + 4);
  if (version != kShareFormatVersion) throw FormatError("unsupported share version " + std::to_string(version));
  const std::uint64_t rows = read_u32_le(bytes.data() + 8);
  const std::uint64_t cols = read_u32_le(bytes.data() + 12);
  const std::uint64_t count = rows * cols;
  if ((bytes.size() - kShareHeaderSize) / 4 < count) throw FormatError("truncated share payload");
  std::vector<std::uint32_t> data(count);
  const std::uint8_t* p = bytes.data() + kShareHeaderSize;
  for (std::uint64_t i = 0; i < count; ++i) data[i] = read_u32_le(p + 4 * i);
  if (consumed) *consumed = kShareHeaderSize + 4 * count;
  return field::FieldMatrix(rows, cols, std::move(data));
}

field::FieldMatrix deserialize_matrix(std::span<const std::uint8_t> bytes, const field::FieldParams& f) {
  std::size_t used = 0;
  auto m = parse_matrix(bytes, &used);
  if (used != bytes.size()) throw FormatError("trailing bytes after share");
  for (std::uint32_t v : m.data()) {
    if (v >= f.p()) throw FormatError("share entry " + std::to_string(v) + " is not reduced mod p");
  }
  return m;
}

}  // namespace cpml::serialization
