#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedguard/io.hpp"
#include "fedguard/signal_model.hpp"

namespace fedguard {

/// Uniform 2-D histogram grid over [-A, A]^2. Columns follow I, rows follow Q.
struct RasterConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  double axis_range = 3.0;

  void validate() const;
  bool operator==(const RasterConfig&) const = default;
};

struct ScatterImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;  // row-major, values in [0, 1]
  FrameLabel label = FrameLabel::legitimate;
  std::uint64_t source_id = 0;

  float at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  int label_index() const { return static_cast<int>(label); }
  bool operator==(const ScatterImage&) const = default;
};

struct LabeledDataset {
  SimulationConfig simulation;  // seed holds the generation seed
  RasterConfig raster;
  std::vector<ScatterImage> images;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  std::size_t count(FrameLabel label) const;
  bool operator==(const LabeledDataset&) const = default;
};

/// Bin of one coordinate under half-open intervals, the top edge closed and
/// out-of-range values clipped to the nearest edge bin.
std::size_t bin_index(double value, double axis_range, std::size_t bins);

/// Pre-normalisation bin counts (row-major).
std::vector<std::uint32_t> raster_counts(const IQFrame& frame, const RasterConfig& cfg);

/// Counts divided by their maximum. Throws InvalidInput on an empty frame.
ScatterImage rasterize(const IQFrame& frame, const RasterConfig& cfg);

/// Frames [first, last) of the stream defined by `seed`. Frame i has label
/// i % 2 (even: legitimate), keyed frame_index i and its own sub-seeded RNG,
/// so shards are reproducible independently of each other.
std::vector<ScatterImage> generate_shard(const SimulationConfig& sim, const RasterConfig& ras,
                                         std::uint64_t seed, std::uint64_t first, std::uint64_t last);

/// per_class images of each label (frames 0 .. 2*per_class-1).
LabeledDataset generate_dataset(const SimulationConfig& sim, const RasterConfig& ras, std::size_t per_class,
                                std::uint64_t seed);

/// Concatenation in argument order; the config snapshot of the first is kept.
/// Throws DimensionError on mismatched grids.
LabeledDataset merge_datasets(std::span<const LabeledDataset> parts);

inline constexpr std::uint16_t kDatasetFormatVersion = 1;

Bytes encode_dataset(const LabeledDataset& ds);
/// Throws CorruptDataset on bad magic, truncation or checksum mismatch.
LabeledDataset decode_dataset(std::span<const std::uint8_t> bytes);

std::size_t save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

}  // namespace fedguard
