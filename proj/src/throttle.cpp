#include "fedguard/throttle.hpp"

#include <algorithm>
#include <thread>

namespace fedguard {

TokenBucket::TokenBucket(std::uint64_t rate_bps)
    : bytes_per_second_(double(rate_bps) / 8.0),
      capacity_(std::max<std::size_t>(64, std::size_t(bytes_per_second_ * 0.010))),
      tokens_(double(capacity_)),
      last_(Clock::now()) {}

void TokenBucket::refill() {
  const auto now = Clock::now();
  tokens_ = std::min(double(capacity_), tokens_ + std::chrono::duration<double>(now - last_).count() * bytes_per_second_);
  last_ = now;
}

void TokenBucket::consume(std::size_t bytes) {
  while (bytes > 0) {
    const std::size_t chunk = std::min(bytes, capacity_);
    refill();
    if (tokens_ < double(chunk)) {
      const double wait = (double(chunk) - tokens_) / bytes_per_second_;
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      refill();
    }
    tokens_ -= double(chunk);
    bytes -= chunk;
  }
}

ThrottledStream::ThrottledStream(ByteStream& inner, ThrottleConfig cfg) : inner_(inner) {
  if (cfg.rate_bps > 0) bucket_ = std::make_unique<TokenBucket>(cfg.rate_bps);
}

void ThrottledStream::write_all(std::span<const std::uint8_t> data) {
  if (!bucket_) {
    inner_.write_all(data);
    return;
  }
  const std::size_t step = bucket_->capacity();
  for (std::size_t off = 0; off < data.size(); off += step) {
    const std::size_t len = std::min(step, data.size() - off);
    bucket_->consume(len);
    inner_.write_all(data.subspan(off, len));
  }
}

std::chrono::duration<double> throttled_transfer(std::span<const std::uint8_t> bytes, ThrottleConfig cfg,
                                                 ByteStream& sink) {
  const auto start = TokenBucket::Clock::now();
  ThrottledStream stream(sink, cfg);
  stream.write_all(bytes);
  return TokenBucket::Clock::now() - start;
}

}  // namespace fedguard
