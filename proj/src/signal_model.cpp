#include "fedguard/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedguard/chacha20.hpp"
#include "fedguard/errors.hpp"

namespace fedguard {

EnergyDictionary::EnergyDictionary(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw InvalidDictionary("energy dictionary is empty");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!std::isfinite(levels_[i]) || levels_[i] <= 0.0)
      throw InvalidDictionary("energy levels must be finite and positive");
    if (i > 0 && levels_[i] <= levels_[i - 1])
      throw InvalidDictionary("energy levels must be strictly increasing");
  }
}

EnergyDictionary EnergyDictionary::testbed() {
  return EnergyDictionary({0.0010, 0.0055, 0.0204, 0.0690, 0.2295, 0.7703, 2.7315, 12.1727});
}

double EnergyDictionary::mean() const {
  return std::accumulate(levels_.begin(), levels_.end(), 0.0) / double(levels_.size());
}

SecretKey SecretKey::from_u64(std::uint64_t value, std::uint64_t frame_index) {
  SecretKey key;
  for (int i = 0; i < 8; ++i) key.material[i] = std::uint8_t(value >> (8 * i));
  key.frame_index = frame_index;
  return key;
}

void SimulationConfig::validate() const {
  if (n == 0) throw InvalidInput("frame length n must be >= 1");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw InvalidInput("snr_db must be finite or +inf");
}

std::vector<std::size_t> derive_level_indices(const SecretKey& key, std::size_t n, std::size_t levels) {
  if (levels == 0) throw InvalidDictionary("energy dictionary is empty");
  ChaChaKey cipher_key{};
  std::copy(key.material.begin(), key.material.end(), cipher_key.begin());

  const std::uint64_t span = std::uint64_t(1) << 32;
  const std::uint64_t accept_below = span - span % levels;

  std::vector<std::size_t> indices(n);
  for (std::size_t slot = 0; slot < n; ++slot) {
    ChaChaNonce nonce{};
    for (int i = 0; i < 8; ++i) nonce[i] = std::uint8_t(key.frame_index >> (8 * i));
    for (int i = 0; i < 4; ++i) nonce[8 + i] = std::uint8_t(std::uint64_t(slot) >> (8 * i));

    bool found = false;
    for (std::uint32_t counter = 0; !found; ++counter) {
      for (std::uint32_t word : chacha20_block(cipher_key, counter, nonce)) {
        if (word < accept_below) {
          indices[slot] = std::size_t(word % levels);
          found = true;
          break;
        }
      }
    }
  }
  return indices;
}

EnergySequence derive_energy_sequence(const SecretKey& key, std::size_t n, const EnergyDictionary& dict) {
  if (n == 0) throw InvalidInput("sequence length must be >= 1");
  EnergySequence seq;
  seq.origin = SequenceOrigin::keyed;
  seq.energies.reserve(n);
  for (std::size_t idx : derive_level_indices(key, n, dict.size())) seq.energies.push_back(dict[idx]);
  return seq;
}

EnergySequence adversary_sequence(Rng& rng, std::size_t n, const EnergyDictionary& dict) {
  if (n == 0) throw InvalidInput("sequence length must be >= 1");
  EnergySequence seq;
  seq.origin = SequenceOrigin::adversarial;
  seq.energies.reserve(n);
  for (std::size_t i = 0; i < n; ++i) seq.energies.push_back(dict[rng.uniform_index(dict.size())]);
  return seq;
}

EnergySequence silent_sequence(std::size_t n) {
  return EnergySequence{std::vector<double>(n, 0.0), SequenceOrigin::silent};
}

double noise_power_for_snr(const EnergyDictionary& dict, double snr_db) {
  if (snr_db == std::numeric_limits<double>::infinity()) return 0.0;
  return dict.mean() / std::pow(10.0, snr_db / 10.0);
}

ChannelRealization draw_channel(Rng& rng, std::size_t n) {
  ChannelRealization h;
  h.gains.reserve(n);
  for (std::size_t i = 0; i < n; ++i) h.gains.push_back(rng.complex_normal(1.0));
  return h;
}

IQFrame apply_channel(const EnergySequence& seq, const ChannelRealization& h, double n0, Rng& rng) {
  if (seq.size() != h.gains.size()) throw DimensionError("sequence and channel lengths differ");
  if (!(n0 >= 0.0)) throw InvalidInput("noise power must be nonnegative");

  IQFrame y;
  y.noise_power = n0;
  y.samples.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    Complex sample = h.gains[i] * std::sqrt(seq.energies[i]);
    if (n0 > 0.0) sample += rng.complex_normal(n0);
    y.samples.push_back(sample);
  }
  const double mean_energy =
      seq.size() ? std::accumulate(seq.energies.begin(), seq.energies.end(), 0.0) / double(seq.size()) : 0.0;
  y.snr_db = 10.0 * std::log10(mean_energy / n0);
  return y;
}

IQFrame key_decode(const IQFrame& y, const EnergySequence& s) {
  if (y.size() != s.size()) throw DimensionError("frame and sequence lengths differ");
  IQFrame out;
  out.noise_power = y.noise_power;
  out.snr_db = y.snr_db;
  out.samples.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (s.energies[i] == 0.0) throw DivisionByZero("keyed energy is zero at slot " + std::to_string(i));
    out.samples.push_back(y.samples[i] / std::sqrt(s.energies[i]));
  }
  return out;
}

LabeledFrame synthesize_frame(FrameLabel label, const SecretKey& key, const SimulationConfig& config, Rng& rng) {
  config.validate();
  const double n0 = noise_power_for_snr(config.dictionary, config.snr_db);
  const EnergySequence keyed = derive_energy_sequence(key, config.n, config.dictionary);

  IQFrame received;
  if (label == FrameLabel::legitimate) {
    const ChannelRealization h_ab = draw_channel(rng, config.n);
    received = apply_channel(keyed, h_ab, n0, rng);
  } else {
    const EnergySequence injected = adversary_sequence(rng, config.n, config.dictionary);
    const ChannelRealization h_db = draw_channel(rng, config.n);
    received = apply_channel(injected, h_db, n0, rng);
  }
  LabeledFrame out{key_decode(received, keyed), label};
  out.frame.snr_db = config.snr_db;
  return out;
}

IQFrame synthesize_raw_frame(bool bit, bool attack_active, const SecretKey& key,
                             const SimulationConfig& config, Rng& rng) {
  config.validate();
  const double n0 = noise_power_for_snr(config.dictionary, config.snr_db);
  EnergySequence transmitted;
  if (bit)
    transmitted = derive_energy_sequence(key, config.n, config.dictionary);
  else if (attack_active)
    transmitted = adversary_sequence(rng, config.n, config.dictionary);
  else
    transmitted = silent_sequence(config.n);
  const ChannelRealization h = draw_channel(rng, config.n);
  IQFrame y = apply_channel(transmitted, h, n0, rng);
  y.snr_db = config.snr_db;
  return y;
}

double frame_energy(const IQFrame& frame) {
  if (frame.samples.empty()) return 0.0;
  double sum = 0.0;
  for (const Complex& c : frame.samples) sum += std::norm(c);
  return sum / double(frame.samples.size());
}

double energy_detector_ber(std::span<const RawFrame> frames, double threshold) {
  if (frames.empty()) throw InvalidInput("no frames to detect");
  if (!(threshold >= 0.0)) throw InvalidInput("threshold must be nonnegative");
  std::size_t errors = 0;
  for (const RawFrame& f : frames) {
    const bool decided = frame_energy(f.frame) > threshold;
    errors += decided != f.bit;
  }
  return double(errors) / double(frames.size());
}

double calibrate_energy_threshold(std::span<const RawFrame> frames) {
  if (frames.empty()) throw InvalidInput("no frames to calibrate on");
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(frames.size());
  for (const RawFrame& f : frames) scored.emplace_back(frame_energy(f.frame), f.bit);
  std::sort(scored.begin(), scored.end());

  // Threshold below everything: every frame declared 1, errors = number of zeros.
  std::ptrdiff_t errors = 0;
  for (const auto& [energy, bit] : scored) errors += !bit;
  std::ptrdiff_t best_errors = errors;
  double best_threshold = 0.0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    // Moving the threshold above scored[i] flips its decision to 0.
    errors += scored[i].second ? 1 : -1;
    if (i + 1 < scored.size() && scored[i + 1].first == scored[i].first) continue;
    const double next = i + 1 < scored.size() ? scored[i + 1].first : scored[i].first * 2.0 + 1.0;
    if (errors < best_errors) {
      best_errors = errors;
      best_threshold = 0.5 * (scored[i].first + next);
    }
  }
  return best_threshold;
}

std::vector<RawFrame> simulate_ook_frames(std::size_t count, bool attack_active, const SecretKey& key,
                                          const SimulationConfig& config, std::uint64_t seed) {
  std::vector<RawFrame> frames;
  frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, i));
    const bool bit = rng.uniform_index(2) == 1;
    frames.push_back({synthesize_raw_frame(bit, attack_active, key.with_frame(key.frame_index + i), config, rng), bit});
  }
  return frames;
}

double energy_detector_baseline(std::size_t count, bool attack_active, const SimulationConfig& config,
                                std::uint64_t seed) {
  const SecretKey key = SecretKey::from_u64(mix_seed(seed, 0x6b6579));
  const auto calibration = simulate_ook_frames(count, false, key.with_frame(1ull << 40), config, mix_seed(seed, 1));
  const double threshold = calibrate_energy_threshold(calibration);
  const auto frames = simulate_ook_frames(count, attack_active, key, config, mix_seed(seed, 2));
  return energy_detector_ber(frames, threshold);
}

double key_match_probability(std::size_t l, std::size_t n) {
  if (l == 0 || n == 0) throw InvalidInput("l and n must be >= 1");
  return std::pow(double(l), -double(n));
}

}  // namespace fedguard
