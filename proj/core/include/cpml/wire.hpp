#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpml/field.hpp"

namespace cpml::wire {

// Frame layout:
//
//   offset 0  uint32 BE length   bytes that follow this field (5 + payload)
//   offset 4  uint8  kind
//   offset 5  uint32 BE round
//   offset 9  payload            zero or more serialized field matrices, back to back
enum class MessageKind : std::uint8_t {
  SetupShare = 1,    // [params 1x2 = (p, worker), Xtilde]
  RoundWeights = 2,  // [Wtilde]
  Coefficients = 3,  // [cbar 1x(r+1)]
  Result = 4,        // [value dx1, counters 1x4 = (mul lo, mul hi, compute us lo, compute us hi)]
  Ack = 5,           // []
  Shutdown = 6,      // []
  Reshare = 7,       // [share]
  Error = 8,         // [message bytes 1xn]
};

inline constexpr std::size_t kFrameHeaderSize = 9;
inline constexpr std::uint32_t kMaxFrameLength = 1U << 30;

struct Frame {
  MessageKind kind = MessageKind::Ack;
  std::uint32_t round = 0;
  std::vector<field::FieldMatrix> payload;
};

std::string kind_name(MessageKind kind);

std::vector<std::uint8_t> encode_frame(const Frame& frame);

// Length announced by a frame's first four bytes. Throws FormatError when the
// value cannot describe a frame.
std::uint32_t frame_length(std::span<const std::uint8_t, 4> prefix);

// Decodes exactly one whole frame (length prefix included). Throws FormatError
// on an unknown kind, a length mismatch or a malformed matrix.
Frame decode_frame(std::span<const std::uint8_t> bytes);

// Error frames carry their text as a 1 x n matrix of byte values.
Frame error_frame(std::uint32_t round, const std::string& message);
std::string error_text(const Frame& frame);

}  // namespace cpml::wire
