#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedguard/random.hpp"

namespace fedguard {

/// Agreed set of positive transmit energies, strictly increasing.
class EnergyDictionary {
 public:
  /// Throws InvalidDictionary when empty, non-positive, non-finite or not
  /// strictly increasing.
  explicit EnergyDictionary(std::vector<double> levels);

  /// The eight-level dictionary used by the SDR testbed.
  static EnergyDictionary testbed();

  std::span<const double> levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  double operator[](std::size_t i) const { return levels_[i]; }
  double mean() const;

  bool operator==(const EnergyDictionary&) const = default;

 private:
  std::vector<double> levels_;
};

/// 128-bit shared secret plus the frame counter it is used with.
struct SecretKey {
  std::array<std::uint8_t, 16> material{};
  std::uint64_t frame_index = 0;

  /// Little-endian embedding of a 64-bit value into the low key bytes.
  static SecretKey from_u64(std::uint64_t value, std::uint64_t frame_index = 0);

  SecretKey with_frame(std::uint64_t index) const {
    SecretKey k = *this;
    k.frame_index = index;
    return k;
  }
};

enum class SequenceOrigin : std::uint8_t { keyed, adversarial, silent };

struct EnergySequence {
  std::vector<double> energies;
  SequenceOrigin origin = SequenceOrigin::keyed;

  std::size_t size() const { return energies.size(); }
};

struct ChannelRealization {
  std::vector<Complex> gains;
};

struct IQFrame {
  std::vector<Complex> samples;
  double noise_power = 0.0;
  double snr_db = 0.0;

  std::size_t size() const { return samples.size(); }
};

struct SimulationConfig {
  std::size_t n = 20;
  EnergyDictionary dictionary = EnergyDictionary::testbed();
  double snr_db = 30.0;
  std::uint64_t seed = 0;

  /// Throws InvalidInput when n == 0 or snr_db is NaN. +inf means noiseless.
  void validate() const;
  bool operator==(const SimulationConfig&) const = default;
};

enum class FrameLabel : std::uint8_t { legitimate = 0, adversary = 1 };

struct LabeledFrame {
  IQFrame frame;
  FrameLabel label = FrameLabel::legitimate;
};

/// Per-slot dictionary indices drawn from the keyed ChaCha20 stream. The
/// cipher key is the 16 key bytes followed by 16 zero bytes; the nonce is
/// frame_index (u64 LE) followed by the slot (u32 LE). Each 32-bit keystream
/// word is accepted only below the largest multiple of L, so indices are
/// exactly uniform.
std::vector<std::size_t> derive_level_indices(const SecretKey& key, std::size_t n, std::size_t levels);

EnergySequence derive_energy_sequence(const SecretKey& key, std::size_t n, const EnergyDictionary& dict);
EnergySequence adversary_sequence(Rng& rng, std::size_t n, const EnergyDictionary& dict);
EnergySequence silent_sequence(std::size_t n);

/// N0 = mean(levels) / 10^(snr_db / 10); zero for snr_db = +inf.
double noise_power_for_snr(const EnergyDictionary& dict, double snr_db);

/// n i.i.d. CN(0, 1) gains.
ChannelRealization draw_channel(Rng& rng, std::size_t n);

/// y_i = h_i * sqrt(seq_i) + z_i, z_i ~ CN(0, n0).
IQFrame apply_channel(const EnergySequence& seq, const ChannelRealization& h, double n0, Rng& rng);

/// y_i / sqrt(s_i). Throws DivisionByZero if any s_i == 0.
IQFrame key_decode(const IQFrame& y, const EnergySequence& s);

/// One decoded frame as seen by the receiver under the given hypothesis.
/// The keyed sequence comes from `key`; the adversary draws its own.
LabeledFrame synthesize_frame(FrameLabel label, const SecretKey& key, const SimulationConfig& config, Rng& rng);

/// Undecoded received frame for the energy-detector baseline. bit-1 sends the
/// keyed sequence; bit-0 is silence, or an adversarial sequence when the
/// attack is active.
IQFrame synthesize_raw_frame(bool bit, bool attack_active, const SecretKey& key,
                             const SimulationConfig& config, Rng& rng);

struct RawFrame {
  IQFrame frame;
  bool bit = false;
};

/// mean_i |y_i|^2 of a frame.
double frame_energy(const IQFrame& frame);

/// Declares bit-1 iff frame_energy > threshold; returns the bit error rate.
double energy_detector_ber(std::span<const RawFrame> frames, double threshold);

/// Threshold minimising the empirical bit error rate on `frames`, chosen
/// among midpoints of the sorted frame energies.
double calibrate_energy_threshold(std::span<const RawFrame> frames);

/// Generates `count` equiprobable-bit frames (frame_index 0..count-1 of `key`).
std::vector<RawFrame> simulate_ook_frames(std::size_t count, bool attack_active, const SecretKey& key,
                                          const SimulationConfig& config, std::uint64_t seed);

/// Convenience: detector calibrated without attack on an independent frame
/// set, then measured on `count` frames with or without attack.
double energy_detector_baseline(std::size_t count, bool attack_active, const SimulationConfig& config,
                                std::uint64_t seed);

/// Probability that an adversary guesses all n keyed levels: l^-n.
double key_match_probability(std::size_t l, std::size_t n);

}  // namespace fedguard
