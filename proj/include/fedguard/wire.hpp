#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "fedguard/io.hpp"

namespace fedguard {

class ByteStream;

enum class MessageType : std::uint8_t {
  hello = 1,
  hello_ack = 2,
  round_start = 3,
  weights_upload = 4,
  global_update = 5,
  metrics_report = 6,
  shutdown = 7,
};

std::string_view to_string(MessageType type);

/// One protocol frame. Layout (little-endian):
///   magic "FLX1" | version u8 | type u8 | round u32 | client u16 |
///   payload length u32 | payload | CRC32(header + payload) u32
struct WireMessage {
  MessageType type = MessageType::hello;
  std::uint32_t round = 0;
  std::uint16_t client_id = 0;
  Bytes payload;

  bool operator==(const WireMessage&) const = default;
};

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kWireHeaderSize = 16;
inline constexpr std::size_t kWireTrailerSize = 4;
inline constexpr std::uint32_t kMaxPayload = 64u << 20;

Bytes encode_message(const WireMessage& msg);

/// Decodes exactly one frame from the front of `bytes`; `consumed` receives
/// its length. Throws ProtocolError (bad magic/version/type/length),
/// CorruptionError (CRC) or TruncationError (short input).
WireMessage decode_message(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

/// Reads exactly one frame, leaving the stream at the next one.
WireMessage read_message(ByteStream& stream);
void write_message(ByteStream& stream, const WireMessage& msg);

}  // namespace fedguard
