#include "fedguard/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "fedguard/errors.hpp"

namespace fedguard {

void RasterConfig::validate() const {
  if (height < 2 || width < 2) throw InvalidInput("raster grid must be at least 2x2");
  if (height > 0xffff || width > 0xffff) throw InvalidInput("raster grid too large");
  if (!(axis_range > 0.0) || !std::isfinite(axis_range)) throw InvalidInput("axis range must be positive");
}

std::size_t LabeledDataset::count(FrameLabel label) const {
  return std::size_t(std::count_if(images.begin(), images.end(),
                                   [label](const ScatterImage& im) { return im.label == label; }));
}

std::size_t bin_index(double value, double axis_range, std::size_t bins) {
  if (std::isnan(value)) throw InvalidInput("non-finite sample");
  const double scaled = (value + axis_range) / (2.0 * axis_range) * double(bins);
  if (scaled <= 0.0) return 0;
  if (scaled >= double(bins)) return bins - 1;
  return std::min(bins - 1, std::size_t(scaled));
}

std::vector<std::uint32_t> raster_counts(const IQFrame& frame, const RasterConfig& cfg) {
  cfg.validate();
  std::vector<std::uint32_t> counts(cfg.height * cfg.width, 0);
  for (const Complex& s : frame.samples) {
    const std::size_t col = bin_index(s.real(), cfg.axis_range, cfg.width);
    const std::size_t row = bin_index(s.imag(), cfg.axis_range, cfg.height);
    ++counts[row * cfg.width + col];
  }
  return counts;
}

ScatterImage rasterize(const IQFrame& frame, const RasterConfig& cfg) {
  if (frame.samples.empty()) throw InvalidInput("cannot rasterize an empty frame");
  const auto counts = raster_counts(frame, cfg);
  const float peak = float(*std::max_element(counts.begin(), counts.end()));

  ScatterImage image;
  image.height = cfg.height;
  image.width = cfg.width;
  image.pixels.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) image.pixels[i] = float(counts[i]) / peak;
  return image;
}

std::vector<ScatterImage> generate_shard(const SimulationConfig& sim, const RasterConfig& ras,
                                         std::uint64_t seed, std::uint64_t first, std::uint64_t last) {
  sim.validate();
  ras.validate();
  const SecretKey key = SecretKey::from_u64(mix_seed(seed, 0x5ec2e7));
  std::vector<ScatterImage> images;
  images.reserve(last > first ? last - first : 0);
  for (std::uint64_t i = first; i < last; ++i) {
    Rng rng(mix_seed(seed, i));
    const FrameLabel label = (i % 2 == 0) ? FrameLabel::legitimate : FrameLabel::adversary;
    const LabeledFrame frame = synthesize_frame(label, key.with_frame(i), sim, rng);
    ScatterImage image = rasterize(frame.frame, ras);
    image.label = label;
    image.source_id = i;
    images.push_back(std::move(image));
  }
  return images;
}

LabeledDataset generate_dataset(const SimulationConfig& sim, const RasterConfig& ras, std::size_t per_class,
                                std::uint64_t seed) {
  if (per_class == 0) throw InvalidInput("per_class must be >= 1");
  LabeledDataset ds;
  ds.simulation = sim;
  ds.simulation.seed = seed;
  ds.raster = ras;
  ds.images = generate_shard(sim, ras, seed, 0, 2 * std::uint64_t(per_class));
  return ds;
}

LabeledDataset merge_datasets(std::span<const LabeledDataset> parts) {
  if (parts.empty()) throw InvalidInput("nothing to merge");
  LabeledDataset out;
  out.simulation = parts.front().simulation;
  out.raster = parts.front().raster;
  for (const LabeledDataset& part : parts) {
    if (part.raster.height != out.raster.height || part.raster.width != out.raster.width)
      throw DimensionError("cannot merge datasets with different grids");
    out.images.insert(out.images.end(), part.images.begin(), part.images.end());
  }
  for (std::size_t i = 0; i < out.images.size(); ++i) out.images[i].source_id = i;
  return out;
}

namespace {

constexpr std::uint8_t kMagic[4] = {'I', 'G', 'D', 'S'};

}  // namespace

Bytes encode_dataset(const LabeledDataset& ds) {
  ds.raster.validate();
  const auto& dict = ds.simulation.dictionary;
  if (ds.simulation.n > 0xffff || dict.size() > 0xffff) throw InvalidInput("config does not fit the format");
  if (ds.images.size() > 0xffffffffu) throw InvalidInput("too many records");
  const std::size_t pixels = ds.raster.height * ds.raster.width;

  Bytes out;
  out.reserve(64 + dict.size() * 8 + ds.images.size() * (1 + 4 * pixels));
  ByteWriter w(out);
  w.put_bytes(kMagic);
  w.put<std::uint16_t>(kDatasetFormatVersion);
  w.put<std::uint16_t>(std::uint16_t(ds.raster.height));
  w.put<std::uint16_t>(std::uint16_t(ds.raster.width));
  w.put<std::uint32_t>(std::uint32_t(ds.images.size()));
  w.put<std::uint16_t>(std::uint16_t(ds.simulation.n));
  w.put<std::uint16_t>(std::uint16_t(dict.size()));
  for (double level : dict.levels()) w.put<double>(level);
  w.put<double>(ds.simulation.snr_db);
  w.put<std::uint64_t>(ds.simulation.seed);
  w.put<double>(ds.raster.axis_range);
  for (const ScatterImage& im : ds.images) {
    if (im.height != ds.raster.height || im.width != ds.raster.width || im.pixels.size() != pixels)
      throw DimensionError("image shape differs from the dataset grid");
    w.put<std::uint8_t>(std::uint8_t(im.label));
    for (float p : im.pixels) w.put<float>(p);
  }
  w.put<std::uint32_t>(crc32(out));
  return out;
}

LabeledDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, kMagic))
    throw CorruptDataset("bad magic");
  if (bytes.size() < 8) throw CorruptDataset("truncated dataset file");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader<CorruptDataset> tail(bytes.last(4));
  if (tail.get<std::uint32_t>() != crc32(body)) throw CorruptDataset("checksum mismatch");

  ByteReader<CorruptDataset> r(body);
  r.get_bytes(4);
  if (r.get<std::uint16_t>() != kDatasetFormatVersion) throw CorruptDataset("unsupported format version");

  LabeledDataset ds;
  ds.raster.height = r.get<std::uint16_t>();
  ds.raster.width = r.get<std::uint16_t>();
  const std::uint32_t records = r.get<std::uint32_t>();
  ds.simulation.n = r.get<std::uint16_t>();
  const std::uint16_t levels = r.get<std::uint16_t>();
  std::vector<double> dict(levels);
  for (double& level : dict) level = r.get<double>();
  try {
    ds.simulation.dictionary = EnergyDictionary(std::move(dict));
  } catch (const InvalidDictionary& e) {
    throw CorruptDataset(std::string("invalid dictionary: ") + e.what());
  }
  ds.simulation.snr_db = r.get<double>();
  ds.simulation.seed = r.get<std::uint64_t>();
  ds.raster.axis_range = r.get<double>();
  try {
    ds.raster.validate();
  } catch (const InvalidInput& e) {
    throw CorruptDataset(std::string("invalid raster header: ") + e.what());
  }

  const std::size_t pixels = ds.raster.height * ds.raster.width;
  if (r.remaining() != std::size_t(records) * (1 + 4 * pixels)) throw CorruptDataset("record section size mismatch");
  ds.images.resize(records);
  for (std::uint32_t i = 0; i < records; ++i) {
    ScatterImage& im = ds.images[i];
    const std::uint8_t label = r.get<std::uint8_t>();
    if (label > 1) throw CorruptDataset("invalid label");
    im.label = FrameLabel(label);
    im.height = ds.raster.height;
    im.width = ds.raster.width;
    im.source_id = i;
    im.pixels.resize(pixels);
    for (float& p : im.pixels) p = r.get<float>();
  }
  return ds;
}

std::size_t save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
  const Bytes bytes = encode_dataset(ds);
  write_file_atomic(path, bytes);
  return bytes.size();
}

LabeledDataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace fedguard
