#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedguard/dataset.hpp"
#include "fedguard/io.hpp"
#include "fedguard/metrics.hpp"

namespace fedguard {

inline constexpr std::size_t kNumClasses = 2;

/// Stack of (3x3 same-padded conv -> ReLU -> 2x2/2 max-pool) stages on a
/// single-channel input, then a dense layer to two softmax logits.
struct ModelSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<std::size_t> filters{8, 16, 32};

  /// 8/16/32 filters on 32x32 (6,914 parameters).
  static ModelSpec desk();
  /// 256/128/64 filters on 32x32.
  static ModelSpec literal();

  /// Throws InvalidSpec if a pooling stage would shrink the grid below 1x1
  /// or a filter count is zero.
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const Tensor&) const = default;
};

/// Parameters in declaration order: per stage kernel [out, in, 3, 3] and
/// bias [out]; then dense matrix [2, features] and dense bias [2].
struct ModelWeights {
  std::vector<Tensor> tensors;

  std::size_t param_count() const;
  bool operator==(const ModelWeights&) const = default;
};

std::vector<std::vector<std::uint32_t>> tensor_shapes(const ModelSpec& spec);
std::size_t param_count(const ModelSpec& spec);

/// He-uniform kernels (limit sqrt(6 / fan_in)), zero biases.
ModelWeights build_model(const ModelSpec& spec, std::uint64_t seed);
ModelWeights zeros_like(const ModelWeights& w);

std::array<double, kNumClasses> logits(const ModelWeights& w, std::span<const float> pixels, std::size_t height,
                                       std::size_t width);
/// Softmax class probabilities. Throws DimensionError if the weights do not
/// fit an image of the given size.
std::array<double, kNumClasses> forward(const ModelWeights& w, std::span<const float> pixels, std::size_t height,
                                        std::size_t width);
std::array<double, kNumClasses> forward(const ModelWeights& w, const ScatterImage& image);

/// Argmax with ties going to class 0.
int predict(const ModelWeights& w, const ScatterImage& image);

struct LossAndGradients {
  double loss = 0.0;       // mean cross-entropy
  ModelWeights gradients;  // mean over the batch
  std::size_t correct = 0;
};

LossAndGradients loss_and_gradients(const ModelWeights& w, std::span<const ScatterImage> batch);
LossAndGradients loss_and_gradients(const ModelWeights& w, std::span<const ScatterImage> images,
                                    std::span<const std::size_t> indices);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Adam moment estimates.
struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_weights(const ModelWeights& w);
  bool operator==(const OptimizerState&) const = default;
};

void adam_step(ModelWeights& w, OptimizerState& state, const ModelWeights& gradients, const TrainConfig& cfg);

struct EpochStats {
  double loss = 0.0;      // mean training loss seen during the epoch
  double accuracy = 0.0;  // training accuracy seen during the epoch
};

struct TrainResult {
  ModelWeights weights;
  OptimizerState state;
  std::vector<EpochStats> history;
};

/// Mini-batch Adam. Epoch e shuffles with Rng(mix_seed(shuffle_seed, e)); the
/// last partial batch is kept.
TrainResult train(ModelWeights w, OptimizerState state, std::span<const ScatterImage> data, const TrainConfig& cfg);

ConfusionMatrix evaluate(const ModelWeights& w, std::span<const ScatterImage> data);

inline constexpr std::uint16_t kWeightsFormatVersion = 1;

/// "FLWT" header then float32 little-endian values in declaration order.
Bytes serialize_weights(const ModelWeights& w);
/// Throws CorruptWeights on bad magic, truncation, trailing bytes or a
/// tensor list that is not a valid network.
ModelWeights deserialize_weights(std::span<const std::uint8_t> bytes);

void save_weights(const ModelWeights& w, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);

}  // namespace fedguard
