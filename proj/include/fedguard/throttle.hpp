#pragma once

#include <chrono>
#include <cstdint>
#include <memory>

#include "fedguard/transport.hpp"

namespace fedguard {

struct ThrottleConfig {
  /// Sustained cap in bits per second; 0 disables throttling.
  std::uint64_t rate_bps = 0;

  /// Nominal rate of the 802.15.4 backhaul radios.
  static ThrottleConfig backhaul() { return {250'000}; }
};

/// Token bucket with continuous refill. Capacity is one refill interval of
/// tokens (10 ms worth, at least 64 bytes), and the bucket starts full.
class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;

  explicit TokenBucket(std::uint64_t rate_bps);

  std::size_t capacity() const { return capacity_; }

  /// Blocks until `bytes` tokens have been drawn; large requests are drawn
  /// capacity-sized chunks at a time.
  void consume(std::size_t bytes);

 private:
  void refill();

  double bytes_per_second_;
  std::size_t capacity_;
  double tokens_;
  Clock::time_point last_;
};

/// Wraps a stream so writes are paced by a token bucket. Reads pass through.
class ThrottledStream : public ByteStream {
 public:
  ThrottledStream(ByteStream& inner, ThrottleConfig cfg);

  std::size_t read_some(std::span<std::uint8_t> out) override { return inner_.read_some(out); }
  void write_all(std::span<const std::uint8_t> data) override;

 private:
  ByteStream& inner_;
  std::unique_ptr<TokenBucket> bucket_;
};

/// Sends `bytes` through a fresh throttle into `sink` and returns the elapsed time.
std::chrono::duration<double> throttled_transfer(std::span<const std::uint8_t> bytes, ThrottleConfig cfg,
                                                 ByteStream& sink);

}  // namespace fedguard
