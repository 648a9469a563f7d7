#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "fedguard/dataset.hpp"
#include "fedguard/errors.hpp"

using namespace fedguard;
namespace fs = std::filesystem;

namespace {

IQFrame frame_of(std::vector<Complex> samples) { return IQFrame{std::move(samples), 0.0, 30.0}; }

std::size_t occupied(const ScatterImage& im) {
  return std::size_t(std::count_if(im.pixels.begin(), im.pixels.end(), [](float p) { return p > 0.0f; }));
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fedguard_test_dataset";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("raster config validation") {
  RasterConfig ok;
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS_AS((RasterConfig{1, 32, 3.0}.validate()), InvalidInput);
  CHECK_THROWS_AS((RasterConfig{32, 1, 3.0}.validate()), InvalidInput);
  CHECK_THROWS_AS((RasterConfig{32, 32, 0.0}.validate()), InvalidInput);
  CHECK_THROWS_AS((RasterConfig{32, 32, -1.0}.validate()), InvalidInput);
}

TEST_CASE("bin edges are half-open with the top edge closed") {
  CHECK(bin_index(-3.0, 3.0, 32) == 0);
  CHECK(bin_index(0.0, 3.0, 32) == 16);
  CHECK(bin_index(-1e-12, 3.0, 32) == 15);
  CHECK(bin_index(3.0, 3.0, 32) == 31);
  CHECK(bin_index(100.0, 3.0, 32) == 31);
  CHECK(bin_index(-100.0, 3.0, 32) == 0);
  // an interior edge belongs to the bin above it
  CHECK(bin_index(-3.0 + 6.0 / 32.0 * 5.0, 3.0, 32) == 5);
}

TEST_CASE("single origin sample lights the central bin") {
  const ScatterImage im = rasterize(frame_of({{0.0, 0.0}}), RasterConfig{});
  CHECK(im.height == 32);
  CHECK(im.width == 32);
  CHECK(occupied(im) == 1);
  CHECK(im.at(16, 16) == 1.0f);
}

TEST_CASE("out-of-range sample clips to the far corner") {
  const ScatterImage im = rasterize(frame_of({{100.0, 100.0}}), RasterConfig{});
  CHECK(occupied(im) == 1);
  CHECK(im.at(31, 31) == 1.0f);
  const ScatterImage low = rasterize(frame_of({{-100.0, 100.0}}), RasterConfig{});
  CHECK(low.at(31, 0) == 1.0f);
}

TEST_CASE("columns follow I and rows follow Q") {
  const ScatterImage im = rasterize(frame_of({{2.9, -2.9}}), RasterConfig{});
  CHECK(im.at(0, 31) == 1.0f);
}

TEST_CASE("distinct bins all normalise to one") {
  std::vector<Complex> samples;
  for (int i = 0; i < 20; ++i) samples.emplace_back(-2.9 + 0.28 * i, 0.05);
  const IQFrame f = frame_of(samples);
  const auto counts = raster_counts(f, RasterConfig{});
  CHECK(std::accumulate(counts.begin(), counts.end(), 0u) == 20u);
  CHECK(std::count(counts.begin(), counts.end(), 1u) == 20);
  const ScatterImage im = rasterize(f, RasterConfig{});
  CHECK(std::count(im.pixels.begin(), im.pixels.end(), 1.0f) == 20);
}

TEST_CASE("repeated bins normalise by the peak count") {
  const ScatterImage im = rasterize(frame_of({{0.0, 0.0}, {0.01, 0.01}, {0.0, 0.02}, {-2.0, 1.0}}), RasterConfig{});
  CHECK(im.at(16, 16) == 1.0f);
  CHECK(im.at(bin_index(1.0, 3.0, 32), bin_index(-2.0, 3.0, 32)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("rasterize rejects an empty frame") {
  CHECK_THROWS_AS(rasterize(frame_of({}), RasterConfig{}), InvalidInput);
}

TEST_CASE("rasterize rejects NaN samples") {
  CHECK_THROWS_AS(rasterize(frame_of({{std::nan(""), 0.0}}), RasterConfig{}), InvalidInput);
}

TEST_CASE("non-square grids") {
  const RasterConfig cfg{8, 4, 1.0};
  const ScatterImage im = rasterize(frame_of({{0.9, -0.9}}), cfg);
  CHECK(im.pixels.size() == 32);
  CHECK(im.at(0, 3) == 1.0f);
}

TEST_CASE("rasterization properties over generated frames") {
  const SimulationConfig sim;
  const RasterConfig ras;
  const SecretKey key = SecretKey::from_u64(77);
  for (std::uint64_t i = 0; i < 200; ++i) {
    Rng rng(mix_seed(5, i));
    const FrameLabel label = i % 2 ? FrameLabel::adversary : FrameLabel::legitimate;
    LabeledFrame lf = synthesize_frame(label, key.with_frame(i), sim, rng);

    const auto counts = raster_counts(lf.frame, ras);
    CHECK(std::accumulate(counts.begin(), counts.end(), 0u) == sim.n);

    const ScatterImage im = rasterize(lf.frame, ras);
    CHECK(*std::max_element(im.pixels.begin(), im.pixels.end()) == 1.0f);
    CHECK(*std::min_element(im.pixels.begin(), im.pixels.end()) >= 0.0f);

    // permutation invariance
    IQFrame shuffled = lf.frame;
    Rng perm(i);
    for (std::size_t k = shuffled.samples.size(); k > 1; --k)
      std::swap(shuffled.samples[k - 1], shuffled.samples[perm.uniform_index(k)]);
    std::reverse(shuffled.samples.begin(), shuffled.samples.end());
    CHECK(rasterize(shuffled, ras).pixels == im.pixels);
  }
}

TEST_CASE("generate_dataset shape and labels") {
  SimulationConfig sim;
  const LabeledDataset one = generate_dataset(sim, RasterConfig{}, 1, 9);
  REQUIRE(one.size() == 2);
  CHECK(one.images[0].label == FrameLabel::legitimate);
  CHECK(one.images[1].label == FrameLabel::adversary);

  const LabeledDataset ds = generate_dataset(sim, RasterConfig{}, 25, 9);
  CHECK(ds.size() == 50);
  CHECK(ds.count(FrameLabel::legitimate) == 25);
  CHECK(ds.count(FrameLabel::adversary) == 25);
  CHECK(ds.count(FrameLabel::legitimate) + ds.count(FrameLabel::adversary) == ds.size());
  CHECK(ds.simulation.seed == 9);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.images[i].source_id == i);
    CHECK(ds.images[i].label_index() == int(i % 2));
  }
  CHECK_THROWS_AS(generate_dataset(sim, RasterConfig{}, 0, 9), InvalidInput);
}

TEST_CASE("generation is deterministic in the seed") {
  const SimulationConfig sim;
  const LabeledDataset a = generate_dataset(sim, RasterConfig{}, 20, 123);
  const LabeledDataset b = generate_dataset(sim, RasterConfig{}, 20, 123);
  const LabeledDataset c = generate_dataset(sim, RasterConfig{}, 20, 124);
  CHECK(encode_dataset(a) == encode_dataset(b));
  CHECK(a.images != c.images);
}

TEST_CASE("shards are independently reproducible") {
  const SimulationConfig sim;
  const RasterConfig ras;
  const auto whole = generate_shard(sim, ras, 42, 0, 40);
  const auto lo = generate_shard(sim, ras, 42, 0, 17);
  const auto hi = generate_shard(sim, ras, 42, 17, 40);
  REQUIRE(lo.size() + hi.size() == whole.size());
  CHECK(std::equal(lo.begin(), lo.end(), whole.begin()));
  CHECK(std::equal(hi.begin(), hi.end(), whole.begin() + 17));
  CHECK(generate_shard(sim, ras, 42, 30, 30).empty());
  // disjoint ranges cover disjoint frame ids
  for (const auto& a : lo)
    for (const auto& b : hi) CHECK(a.source_id != b.source_id);
}

TEST_CASE("class-conditional image statistics at the default setting") {
  // Frozen from an independent Monte Carlo of 5,000 frames per class:
  // legitimate 19.155 occupied bins (se 0.012), mean pixel 0.013663;
  // adversary 16.500 occupied bins (se 0.024), mean pixel 0.007763.
  // Adversarial outliers clip onto shared edge bins, so they occupy fewer.
  const LabeledDataset ds = generate_dataset(SimulationConfig{}, RasterConfig{}, 5000, 2024);
  double occ[2] = {0, 0}, act[2] = {0, 0};
  for (const auto& im : ds.images) {
    occ[im.label_index()] += double(occupied(im));
    act[im.label_index()] += std::accumulate(im.pixels.begin(), im.pixels.end(), 0.0) / double(im.pixels.size());
  }
  for (auto& v : occ) v /= 5000.0;
  for (auto& v : act) v /= 5000.0;
  CHECK(occ[0] == doctest::Approx(19.155).epsilon(0.15 / 19.155));
  CHECK(occ[1] == doctest::Approx(16.500).epsilon(0.15 / 16.5));
  CHECK(act[0] == doctest::Approx(0.013663).epsilon(0.0004 / 0.013663));
  CHECK(act[1] == doctest::Approx(0.007763).epsilon(0.0004 / 0.007763));
  CHECK(act[0] - act[1] > 0.004);
}

TEST_CASE("dataset round trip through a file") {
  const LabeledDataset ds = generate_dataset(SimulationConfig{}, RasterConfig{}, 10, 3);
  const fs::path p = scratch("rt.igds");
  const std::size_t bytes = save_dataset(ds, p);
  CHECK(bytes == fs::file_size(p));
  const std::size_t expected = 4 + 2 + 2 + 2 + 4 + 2 + 2 + 8 * 8 + 8 + 8 + 8 + 20 * (1 + 4 * 32 * 32) + 4;
  CHECK(bytes == expected);
  CHECK(load_dataset(p) == ds);
}

TEST_CASE("randomised round trips are bit exact") {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(mix_seed(trial, 0xda7a));
    SimulationConfig sim;
    sim.n = 1 + rng.uniform_index(40);
    std::vector<double> levels;
    double level = 0.0;
    const std::size_t l = 1 + rng.uniform_index(10);
    for (std::size_t i = 0; i < l; ++i) levels.push_back(level += 0.01 + rng.uniform());
    sim.dictionary = EnergyDictionary(levels);
    sim.snr_db = -10.0 + 50.0 * rng.uniform();
    RasterConfig ras{2 + rng.uniform_index(20), 2 + rng.uniform_index(20), 0.5 + 4.0 * rng.uniform()};
    const LabeledDataset ds = generate_dataset(sim, ras, 1 + rng.uniform_index(4), rng.next_u64());
    const Bytes enc = encode_dataset(ds);
    const LabeledDataset back = decode_dataset(enc);
    CHECK(back == ds);
    CHECK(encode_dataset(back) == enc);
  }
}

TEST_CASE("empty dataset is a valid zero-record file") {
  LabeledDataset ds;
  const fs::path p = scratch("empty.igds");
  save_dataset(ds, p);
  const LabeledDataset back = load_dataset(p);
  CHECK(back.empty());
  CHECK(back == ds);
}

TEST_CASE("corruption is detected") {
  const LabeledDataset ds = generate_dataset(SimulationConfig{}, RasterConfig{8, 8, 3.0}, 2, 1);
  const Bytes enc = encode_dataset(ds);

  SUBCASE("every single-byte flip") {
    for (std::size_t i = 0; i < enc.size(); ++i) {
      Bytes bad = enc;
      bad[i] ^= 0x5a;
      CHECK_THROWS_AS(decode_dataset(bad), CorruptDataset);
    }
  }
  SUBCASE("payload flip reports a checksum mismatch") {
    Bytes bad = enc;
    bad[enc.size() / 2] ^= 1;
    CHECK_THROWS_WITH_AS(decode_dataset(bad), "checksum mismatch", CorruptDataset);
  }
  SUBCASE("bad magic") {
    Bytes bad = enc;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_dataset(bad), "bad magic", CorruptDataset);
  }
  SUBCASE("every truncation") {
    for (std::size_t n = 0; n < enc.size(); ++n)
      CHECK_THROWS_AS(decode_dataset(std::span(enc).first(n)), CorruptDataset);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dataset(scratch("does-not-exist.igds")), Error);
  }
}

TEST_CASE("merge renumbers and checks grids") {
  const LabeledDataset a = generate_dataset(SimulationConfig{}, RasterConfig{}, 2, 1);
  const LabeledDataset b = generate_dataset(SimulationConfig{}, RasterConfig{}, 3, 2);
  const LabeledDataset parts[] = {a, b};
  const LabeledDataset m = merge_datasets(parts);
  CHECK(m.size() == 10);
  CHECK(m.images[4].pixels == b.images[0].pixels);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(m.images[i].source_id == i);

  const LabeledDataset c = generate_dataset(SimulationConfig{}, RasterConfig{16, 16, 3.0}, 1, 2);
  const LabeledDataset mixed[] = {a, c};
  CHECK_THROWS_AS(merge_datasets(mixed), DimensionError);
  CHECK_THROWS_AS(merge_datasets({}), InvalidInput);
}
