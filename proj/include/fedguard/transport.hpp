#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "fedguard/io.hpp"

namespace fedguard {

/// Reliable, ordered byte stream.
class ByteStream {
 public:
  virtual ~ByteStream() = default;

  /// Reads up to out.size() bytes; returns 0 only at end of stream.
  virtual std::size_t read_some(std::span<std::uint8_t> out) = 0;
  virtual void write_all(std::span<const std::uint8_t> data) = 0;

  /// Fills `out` completely or throws TruncationError at end of stream.
  void read_exact(std::span<std::uint8_t> out);
};

/// In-memory stream: writes append, reads consume from the front.
class MemoryStream : public ByteStream {
 public:
  MemoryStream() = default;
  explicit MemoryStream(Bytes initial) : buffer_(std::move(initial)) {}

  std::size_t read_some(std::span<std::uint8_t> out) override;
  void write_all(std::span<const std::uint8_t> data) override;

  const Bytes& buffer() const { return buffer_; }
  std::size_t unread() const { return buffer_.size() - read_pos_; }

 private:
  Bytes buffer_;
  std::size_t read_pos_ = 0;
};

/// Connected TCP socket. Reads and writes throw TimeoutError when the
/// configured timeout elapses and TransportError on other failures.
class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd);
  ~TcpStream() override;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  static std::unique_ptr<TcpStream> connect(const std::string& host, std::uint16_t port);

  void set_timeout(std::chrono::milliseconds timeout);
  std::size_t read_some(std::span<std::uint8_t> out) override;
  void write_all(std::span<const std::uint8_t> data) override;

 private:
  int fd_;
};

class TcpListener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port.
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }

  /// Waits at most `timeout` for one connection; throws TimeoutError.
  std::unique_ptr<TcpStream> accept(std::chrono::milliseconds timeout);

 private:
  int fd_;
  std::uint16_t port_;
};

}  // namespace fedguard
