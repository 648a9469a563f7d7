#include "fedguard/wire.hpp"

#include <algorithm>

#include "fedguard/errors.hpp"
#include "fedguard/transport.hpp"

namespace fedguard {
namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'L', 'X', '1'};

bool known_type(std::uint8_t t) {
  return t >= std::uint8_t(MessageType::hello) && t <= std::uint8_t(MessageType::shutdown);
}

struct Header {
  MessageType type;
  std::uint32_t round;
  std::uint16_t client_id;
  std::uint32_t payload_length;
};

Header parse_header(std::span<const std::uint8_t> h) {
  if (!std::equal(h.begin(), h.begin() + 4, kMagic)) throw ProtocolError("bad magic");
  ByteReader<TruncationError> r(h.subspan(4));
  if (r.get<std::uint8_t>() != kProtocolVersion) throw ProtocolError("unsupported protocol version");
  const std::uint8_t type = r.get<std::uint8_t>();
  if (!known_type(type)) throw ProtocolError("unknown message type " + std::to_string(type));
  Header out{MessageType(type), 0, 0, 0};
  out.round = r.get<std::uint32_t>();
  out.client_id = r.get<std::uint16_t>();
  out.payload_length = r.get<std::uint32_t>();
  if (out.payload_length > kMaxPayload) throw ProtocolError("payload length exceeds limit");
  return out;
}

}  // namespace

std::string_view to_string(MessageType type) {
  switch (type) {
    case MessageType::hello: return "HELLO";
    case MessageType::hello_ack: return "HELLO_ACK";
    case MessageType::round_start: return "ROUND_START";
    case MessageType::weights_upload: return "WEIGHTS_UPLOAD";
    case MessageType::global_update: return "GLOBAL_UPDATE";
    case MessageType::metrics_report: return "METRICS_REPORT";
    case MessageType::shutdown: return "SHUTDOWN";
  }
  return "UNKNOWN";
}

Bytes encode_message(const WireMessage& msg) {
  if (!known_type(std::uint8_t(msg.type))) throw ProtocolError("unknown message type");
  if (msg.payload.size() > kMaxPayload) throw ProtocolError("payload length exceeds limit");
  Bytes out;
  out.reserve(kWireHeaderSize + msg.payload.size() + kWireTrailerSize);
  ByteWriter w(out);
  w.put_bytes(kMagic);
  w.put<std::uint8_t>(kProtocolVersion);
  w.put<std::uint8_t>(std::uint8_t(msg.type));
  w.put<std::uint32_t>(msg.round);
  w.put<std::uint16_t>(msg.client_id);
  w.put<std::uint32_t>(std::uint32_t(msg.payload.size()));
  w.put_bytes(msg.payload);
  w.put<std::uint32_t>(crc32(out));
  return out;
}

WireMessage decode_message(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  if (bytes.size() < kWireHeaderSize) {
    if (!std::equal(bytes.begin(), bytes.begin() + std::min<std::size_t>(bytes.size(), 4), kMagic))
      throw ProtocolError("bad magic");
    throw TruncationError("short frame header");
  }
  const Header h = parse_header(bytes.first(kWireHeaderSize));
  const std::size_t frame = kWireHeaderSize + h.payload_length + kWireTrailerSize;
  if (bytes.size() < frame) throw TruncationError("short frame body");

  ByteReader<TruncationError> tail(bytes.subspan(frame - kWireTrailerSize, kWireTrailerSize));
  if (tail.get<std::uint32_t>() != crc32(bytes.first(frame - kWireTrailerSize)))
    throw CorruptionError("frame CRC mismatch");

  WireMessage msg{h.type, h.round, h.client_id, {}};
  const auto payload = bytes.subspan(kWireHeaderSize, h.payload_length);
  msg.payload.assign(payload.begin(), payload.end());
  if (consumed) *consumed = frame;
  return msg;
}

WireMessage read_message(ByteStream& stream) {
  Bytes frame(kWireHeaderSize);
  stream.read_exact(frame);
  const Header h = parse_header(frame);
  frame.resize(kWireHeaderSize + h.payload_length + kWireTrailerSize);
  stream.read_exact(std::span(frame).subspan(kWireHeaderSize));
  return decode_message(frame);
}

void write_message(ByteStream& stream, const WireMessage& msg) { stream.write_all(encode_message(msg)); }

}  // namespace fedguard
