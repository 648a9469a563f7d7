#include <doctest.h>

#include "fedguard/throttle.hpp"

using namespace fedguard;

TEST_CASE("bucket capacity") {
  CHECK(TokenBucket(250'000).capacity() == 312);
  CHECK(TokenBucket(1'000).capacity() == 64);
  CHECK(ThrottleConfig::backhaul().rate_bps == 250'000);
}

TEST_CASE("backhaul-rate transfer time") {
  // 30,720 bytes * 8 / 250,000 bps = 0.983 s; the full initial bucket saves 10 ms.
  const Bytes data(30'720, 0x5a);
  MemoryStream sink;
  const double elapsed = throttled_transfer(data, ThrottleConfig::backhaul(), sink).count();
  CHECK(elapsed == doctest::Approx(30'720 * 8 / 250'000.0).epsilon(0.20));
  CHECK(elapsed >= 0.95);
  CHECK(sink.buffer() == data);
}

TEST_CASE("unthrottled transfer is immediate") {
  const Bytes data(1 << 20, 1);
  MemoryStream sink;
  CHECK(throttled_transfer(data, ThrottleConfig{0}, sink).count() < 0.5);
  CHECK(sink.buffer().size() == data.size());
}

TEST_CASE("sequential transfers add up") {
  const Bytes data(10'000, 2);
  const ThrottleConfig cfg{200'000};
  MemoryStream sink;
  const double one = throttled_transfer(data, cfg, sink).count();
  const double two = throttled_transfer(data, cfg, sink).count();
  const auto start = TokenBucket::Clock::now();
  ThrottledStream stream(sink, cfg);
  stream.write_all(data);
  stream.write_all(data);
  const double together = std::chrono::duration<double>(TokenBucket::Clock::now() - start).count();
  CHECK(one == doctest::Approx(0.4).epsilon(0.2));
  CHECK(together == doctest::Approx(one + two).epsilon(0.2));
}

TEST_CASE("reads pass through untouched") {
  MemoryStream inner(Bytes{1, 2, 3, 4});
  ThrottledStream stream(inner, ThrottleConfig{8'000});
  Bytes out(4);
  stream.read_exact(out);
  CHECK(out == Bytes{1, 2, 3, 4});
}
