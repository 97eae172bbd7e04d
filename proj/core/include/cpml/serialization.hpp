#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cpml/field.hpp"

namespace cpml::serialization {

// On-disk and on-wire layout of one field matrix:
//
//   offset 0   "LCPM"                magic
//   offset 4   uint32 LE version     (kShareFormatVersion)
//   offset 8   uint32 LE rows
//   offset 12  uint32 LE cols
//   offset 16  rows * cols uint32 LE entries, row-major
inline constexpr std::uint32_t kShareFormatVersion = 1;
inline constexpr std::size_t kShareHeaderSize = 16;

void append_matrix(std::vector<std::uint8_t>& out, const field::FieldMatrix& m);
std::vector<std::uint8_t> serialize_matrix(const field::FieldMatrix& m);

// Parses one matrix from the front of `bytes`; `consumed` receives its
// encoded length. Throws FormatError on a bad header or truncated payload.
field::FieldMatrix parse_matrix(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

// Rejects trailing bytes and entries >= p.
field::FieldMatrix deserialize_matrix(std::span<const std::uint8_t> bytes, const field::FieldParams& f);

void write_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v);
std::uint32_t read_u32_le(const std::uint8_t* p) noexcept;
void write_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v);
std::uint32_t read_u32_be(const std::uint8_t* p) noexcept;

}  // namespace cpml::serialization
