#include "cpml/wire.hpp"

#include <algorithm>

#include "cpml/errors.hpp"
#include "cpml/serialization.hpp"

namespace cpml::wire {

std::string kind_name(MessageKind kind) {
  switch (kind) {
    case MessageKind::SetupShare: return "SetupShare";
    case MessageKind::RoundWeights: return "RoundWeights";
    case MessageKind::Coefficients: return "Coefficients";
    case MessageKind::Result: return "Result";
    case MessageKind::Ack: return "Ack";
    case MessageKind::Shutdown: return "Shutdown";
    case MessageKind::Reshare: return "Reshare";
    case MessageKind::Error: return "Error";
  }
  return "kind " + std::to_string(static_cast<int>(kind));
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  std::vector<std::uint8_t> out(4);
  out.push_back(static_cast<std::uint8_t>(frame.kind));
  serialization::write_u32_be(out, frame.round);
  for (const auto& m : frame.payload) serialization::append_matrix(out, m);
  const std::size_t length = out.size() - 4;
  if (length > kMaxFrameLength) throw FormatError("frame of " + std::to_string(length) + " bytes is too large");
  std::vector<std::uint8_t> prefix;
  serialization::write_u32_be(prefix, static_cast<std::uint32_t>(length));
  std::copy(prefix.begin(), prefix.end(), out.begin());
  return out;
}

std::uint32_t frame_length(std::span<const std::uint8_t, 4> prefix) {
  const std::uint32_t length = serialization::read_u32_be(prefix.data());
  if (length < kFrameHeaderSize - 4) throw FormatError("frame length " + std::to_string(length) + " below header size");
  if (length > kMaxFrameLength) throw FormatError("frame length " + std::to_string(length) + " exceeds limit");
  return length;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw FormatError("frame shorter than its 9-byte header");
  const std::uint32_t length = frame_length(bytes.first<4>());
  if (bytes.size() - 4 != length) {
    throw FormatError("frame announces " + std::to_string(length) + " bytes, got " + std::to_string(bytes.size() - 4));
  }
  const std::uint8_t kind = bytes[4];
  if (kind < static_cast<std::uint8_t>(MessageKind::SetupShare) || kind > static_cast<std::uint8_t>(MessageKind::Error)) {
    throw FormatError("unknown message kind " + std::to_string(kind));
  }
  Frame frame;
  frame.kind = static_cast<MessageKind>(kind);
  frame.round = serialization::read_u32_be(bytes.data() + 5);
  auto rest = bytes.subspan(kFrameHeaderSize);
  while (!rest.empty()) {
    std::size_t used = 0;
    frame.payload.push_back(serialization::parse_matrix(rest, &used));
    rest = rest.subspan(used);
  }
  return frame;
}

Frame error_frame(std::uint32_t round, const std::string& message) {
  field::FieldMatrix text(1, message.size());
  for (std::size_t i = 0; i < message.size(); ++i) text(0, i) = static_cast<std::uint8_t>(message[i]);
  return Frame{MessageKind::Error, round, {std::move(text)}};
}

std::string error_text(const Frame& frame) {
  if (frame.payload.empty()) return {};
  std::string out;
  for (std::uint32_t v : frame.payload.front().data()) out.push_back(static_cast<char>(v & 0xFF));
  return out;
}

}  // namespace cpml::wire
