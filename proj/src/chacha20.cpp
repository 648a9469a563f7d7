#include "fedguard/chacha20.hpp"

#include <bit>

namespace fedguard {
namespace {

inline std::uint32_t load_le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

inline void quarter_round(std::array<std::uint32_t, 16>& x, int a, int b, int c, int d) {
  x[a] += x[b]; x[d] ^= x[a]; x[d] = std::rotl(x[d], 16);
  x[c] += x[d]; x[b] ^= x[c]; x[b] = std::rotl(x[b], 12);
  x[a] += x[b]; x[d] ^= x[a]; x[d] = std::rotl(x[d], 8);
  x[c] += x[d]; x[b] ^= x[c]; x[b] = std::rotl(x[b], 7);
}

}  // namespace

std::array<std::uint32_t, 16> chacha20_block(const ChaChaKey& key, std::uint32_t counter,
                                             const ChaChaNonce& nonce) {
  std::array<std::uint32_t, 16> state{0x61707865u, 0x3320646eu, 0x79622d32u, 0x6b206574u};
  for (int i = 0; i < 8; ++i) state[4 + i] = load_le32(key.data() + 4 * i);
  state[12] = counter;
  for (int i = 0; i < 3; ++i) state[13 + i] = load_le32(nonce.data() + 4 * i);

  auto x = state;
  for (int round = 0; round < 10; ++round) {
    quarter_round(x, 0, 4, 8, 12);
    quarter_round(x, 1, 5, 9, 13);
    quarter_round(x, 2, 6, 10, 14);
    quarter_round(x, 3, 7, 11, 15);
    quarter_round(x, 0, 5, 10, 15);
    quarter_round(x, 1, 6, 11, 12);
    quarter_round(x, 2, 7, 8, 13);
    quarter_round(x, 3, 4, 9, 14);
  }
  for (int i = 0; i < 16; ++i) x[i] += state[i];
  return x;
}

std::array<std::uint8_t, 64> chacha20_block_bytes(const ChaChaKey& key, std::uint32_t counter,
                                                  const ChaChaNonce& nonce) {
  const auto words = chacha20_block(key, counter, nonce);
  std::array<std::uint8_t, 64> out{};
  for (int i = 0; i < 16; ++i) {
    out[4 * i + 0] = std::uint8_t(words[i]);
    out[4 * i + 1] = std::uint8_t(words[i] >> 8);
    out[4 * i + 2] = std::uint8_t(words[i] >> 16);
    out[4 * i + 3] = std::uint8_t(words[i] >> 24);
  }
  return out;
}

}  // namespace fedguard
