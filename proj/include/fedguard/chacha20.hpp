#pragma once

#include <array>
#include <cstdint>

namespace fedguard {

using ChaChaKey = std::array<std::uint8_t, 32>;
using ChaChaNonce = std::array<std::uint8_t, 12>;

/// ChaCha20 block function (20 rounds, 32-bit block counter, 96-bit nonce).
/// Returns the 16 output words after the final state addition.
std::array<std::uint32_t, 16> chacha20_block(const ChaChaKey& key, std::uint32_t counter,
                                             const ChaChaNonce& nonce);

/// Serialized (little-endian) keystream block.
std::array<std::uint8_t, 64> chacha20_block_bytes(const ChaChaKey& key, std::uint32_t counter,
                                                  const ChaChaNonce& nonce);

}  // namespace fedguard
