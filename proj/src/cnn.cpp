#include "fedguard/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedguard/errors.hpp"
#include "fedguard/random.hpp"

namespace fedguard {

ModelSpec ModelSpec::desk() { return ModelSpec{32, 32, {8, 16, 32}}; }
ModelSpec ModelSpec::literal() { return ModelSpec{32, 32, {256, 128, 64}}; }

void ModelSpec::validate() const {
  if (height == 0 || width == 0) throw InvalidSpec("input grid must be non-empty");
  std::size_t h = height, w = width;
  for (std::size_t f : filters) {
    if (f == 0) throw InvalidSpec("filter count must be >= 1");
    if (h < 2 || w < 2) throw InvalidSpec("max-pooling would shrink the grid below 1x1");
    h /= 2;
    w /= 2;
  }
}

std::size_t ModelWeights::param_count() const {
  std::size_t total = 0;
  for (const Tensor& t : tensors) total += t.size();
  return total;
}

std::vector<std::vector<std::uint32_t>> tensor_shapes(const ModelSpec& spec) {
  spec.validate();
  std::vector<std::vector<std::uint32_t>> shapes;
  std::size_t channels = 1, h = spec.height, w = spec.width;
  for (std::size_t f : spec.filters) {
    shapes.push_back({std::uint32_t(f), std::uint32_t(channels), 3, 3});
    shapes.push_back({std::uint32_t(f)});
    channels = f;
    h /= 2;
    w /= 2;
  }
  shapes.push_back({std::uint32_t(kNumClasses), std::uint32_t(channels * h * w)});
  shapes.push_back({std::uint32_t(kNumClasses)});
  return shapes;
}

namespace {

std::size_t shape_size(const std::vector<std::uint32_t>& shape) {
  std::size_t n = 1;
  for (std::uint32_t d : shape) n *= d;
  return n;
}

// Checks the kernel/bias chain and dense head, independent of input size.
// Returns the number of conv stages.
template <typename Err>
std::size_t check_structure(const ModelWeights& w) {
  const auto& t = w.tensors;
  if (t.size() < 2 || t.size() % 2 != 0) throw Err("unexpected tensor count");
  for (const Tensor& x : t)
    if (x.values.size() != shape_size(x.shape)) throw Err("tensor value count does not match its shape");
  const std::size_t stages = (t.size() - 2) / 2;
  std::size_t channels = 1;
  for (std::size_t s = 0; s < stages; ++s) {
    const auto& k = t[2 * s].shape;
    const auto& b = t[2 * s + 1].shape;
    if (k.size() != 4 || k[1] != channels || k[2] != 3 || k[3] != 3 || k[0] == 0)
      throw Err("conv kernel shape mismatch at stage " + std::to_string(s));
    if (b.size() != 1 || b[0] != k[0]) throw Err("conv bias shape mismatch at stage " + std::to_string(s));
    channels = k[0];
  }
  const auto& dense = t[t.size() - 2].shape;
  const auto& bias = t.back().shape;
  if (dense.size() != 2 || dense[0] != kNumClasses || dense[1] == 0 || dense[1] % channels != 0)
    throw Err("dense matrix shape mismatch");
  if (bias.size() != 1 || bias[0] != kNumClasses) throw Err("dense bias shape mismatch");
  return stages;
}

struct Stage {
  std::size_t in_ch, out_ch;
  std::size_t h, w;    // conv input/output grid
  std::size_t ph, pw;  // after pooling
};

// Forward/backward machinery for one set of weights and one input size.
// Buffers are reused across samples.
class Evaluator {
 public:
  Evaluator(const ModelWeights& weights, std::size_t height, std::size_t width) : w_(weights) {
    const std::size_t stages = check_structure<DimensionError>(weights);
    std::size_t channels = 1, h = height, wd = width;
    for (std::size_t s = 0; s < stages; ++s) {
      const std::size_t out = weights.tensors[2 * s].shape[0];
      if (h < 2 || wd < 2) throw DimensionError("input too small for the network depth");
      stages_.push_back({channels, out, h, wd, h / 2, wd / 2});
      channels = out;
      h /= 2;
      wd /= 2;
    }
    features_ = channels * h * wd;
    if (weights.tensors[2 * stages].shape[1] != features_)
      throw DimensionError("dense layer does not match the input size");
    height_ = height;
    width_ = width;

    buffers_.resize(stages_.size());
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      const Stage& st = stages_[s];
      buffers_[s].in_pad.assign(st.in_ch * (st.h + 2) * (st.w + 2), 0.0);
      buffers_[s].act.assign(st.out_ch * st.h * st.w, 0.0);
      buffers_[s].pooled.assign(st.out_ch * st.ph * st.pw, 0.0);
      buffers_[s].argmax.assign(st.out_ch * st.ph * st.pw, 0);
    }
    if (stages_.empty()) input_.assign(features_, 0.0);
  }

  std::array<double, kNumClasses> run(std::span<const float> pixels) {
    if (pixels.size() != height_ * width_) throw DimensionError("image size does not match");
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      const Stage& st = stages_[s];
      Buffers& b = buffers_[s];
      const std::size_t pw = st.w + 2;
      if (s == 0) {
        for (std::size_t y = 0; y < st.h; ++y)
          for (std::size_t x = 0; x < st.w; ++x) b.in_pad[(y + 1) * pw + x + 1] = pixels[y * st.w + x];
      } else {
        const Buffers& prev = buffers_[s - 1];
        for (std::size_t c = 0; c < st.in_ch; ++c)
          for (std::size_t y = 0; y < st.h; ++y)
            for (std::size_t x = 0; x < st.w; ++x)
              b.in_pad[(c * (st.h + 2) + y + 1) * pw + x + 1] = prev.pooled[(c * st.h + y) * st.w + x];
      }
      conv_relu(st, w_.tensors[2 * s].values, w_.tensors[2 * s + 1].values, b);
      max_pool(st, b);
    }
    flat_ = stages_.empty() ? input_from(pixels) : std::span<const double>(buffers_.back().pooled);

    const auto& dense = w_.tensors[w_.tensors.size() - 2].values;
    const auto& bias = w_.tensors.back().values;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      double z = bias[k];
      const double* row = dense.data() + k * features_;
      for (std::size_t j = 0; j < features_; ++j) z += row[j] * flat_[j];
      logits_[k] = z;
    }
    return logits_;
  }

  // Accumulates d(loss)/d(params) of the last run() into `grads`, scaled by
  // `scale`. Returns the sample's cross-entropy.
  double backward(int label, ModelWeights& grads, double scale) {
    const double peak = std::max(logits_[0], logits_[1]);
    const double lse = peak + std::log(std::exp(logits_[0] - peak) + std::exp(logits_[1] - peak));
    std::array<double, kNumClasses> dlogit{};
    for (std::size_t k = 0; k < kNumClasses; ++k) dlogit[k] = std::exp(logits_[k] - lse) * scale;
    dlogit[std::size_t(label)] -= scale;

    const std::size_t nt = w_.tensors.size();
    const auto& dense = w_.tensors[nt - 2].values;
    auto& g_dense = grads.tensors[nt - 2].values;
    auto& g_bias = grads.tensors[nt - 1].values;
    d_flat_.assign(features_, 0.0);
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      g_bias[k] += dlogit[k];
      const double* row = dense.data() + k * features_;
      double* grow = g_dense.data() + k * features_;
      for (std::size_t j = 0; j < features_; ++j) {
        grow[j] += dlogit[k] * flat_[j];
        d_flat_[j] += row[j] * dlogit[k];
      }
    }

    std::vector<double>* d_pooled = &d_flat_;
    for (std::size_t s = stages_.size(); s-- > 0;) {
      const Stage& st = stages_[s];
      Buffers& b = buffers_[s];
      const std::size_t plane = st.h * st.w;

      d_act_.assign(st.out_ch * plane, 0.0);
      for (std::size_t i = 0; i < b.argmax.size(); ++i) d_act_[b.argmax[i]] += (*d_pooled)[i];
      for (std::size_t i = 0; i < d_act_.size(); ++i)
        if (b.act[i] <= 0.0) d_act_[i] = 0.0;

      const auto& kernel = w_.tensors[2 * s].values;
      auto& g_kernel = grads.tensors[2 * s].values;
      auto& g_cbias = grads.tensors[2 * s + 1].values;
      const std::size_t pw = st.w + 2;
      const std::size_t pplane = (st.h + 2) * pw;
      const bool propagate = s > 0;
      if (propagate) d_in_pad_.assign(st.in_ch * pplane, 0.0);

      for (std::size_t o = 0; o < st.out_ch; ++o) {
        const double* dout = d_act_.data() + o * plane;
        double bias_grad = 0.0;
        for (std::size_t i = 0; i < plane; ++i) bias_grad += dout[i];
        g_cbias[o] += bias_grad;
        if (bias_grad == 0.0 && std::all_of(dout, dout + plane, [](double v) { return v == 0.0; })) continue;
        for (std::size_t c = 0; c < st.in_ch; ++c) {
          const double* in = b.in_pad.data() + c * pplane;
          double* din = propagate ? d_in_pad_.data() + c * pplane : nullptr;
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const std::size_t ki = ((o * st.in_ch + c) * 3 + ky) * 3 + kx;
              const double kv = kernel[ki];
              double acc = 0.0;
              for (std::size_t y = 0; y < st.h; ++y) {
                const double* dr = dout + y * st.w;
                const double* ir = in + (y + ky) * pw + kx;
                for (std::size_t x = 0; x < st.w; ++x) acc += dr[x] * ir[x];
                if (din) {
                  double* dir = din + (y + ky) * pw + kx;
                  for (std::size_t x = 0; x < st.w; ++x) dir[x] += kv * dr[x];
                }
              }
              g_kernel[ki] += acc;
            }
        }
      }

      if (propagate) {
        const Stage& prev = stages_[s - 1];
        d_prev_.assign(prev.out_ch * prev.ph * prev.pw, 0.0);
        for (std::size_t c = 0; c < st.in_ch; ++c)
          for (std::size_t y = 0; y < st.h; ++y)
            for (std::size_t x = 0; x < st.w; ++x)
              d_prev_[(c * st.h + y) * st.w + x] = d_in_pad_[c * pplane + (y + 1) * pw + x + 1];
        std::swap(d_prev_, d_hold_);
        d_pooled = &d_hold_;
      }
    }
    return lse - logits_[std::size_t(label)];
  }

 private:
  struct Buffers {
    std::vector<double> in_pad;
    std::vector<double> act;
    std::vector<double> pooled;
    std::vector<std::uint32_t> argmax;
  };

  std::span<const double> input_from(std::span<const float> pixels) {
    std::copy(pixels.begin(), pixels.end(), input_.begin());
    return input_;
  }

  static void conv_relu(const Stage& st, const std::vector<double>& kernel, const std::vector<double>& bias,
                        Buffers& b) {
    const std::size_t pw = st.w + 2;
    const std::size_t pplane = (st.h + 2) * pw;
    const std::size_t plane = st.h * st.w;
    for (std::size_t o = 0; o < st.out_ch; ++o) {
      double* out = b.act.data() + o * plane;
      std::fill(out, out + plane, bias[o]);
      for (std::size_t c = 0; c < st.in_ch; ++c) {
        const double* in = b.in_pad.data() + c * pplane;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const double kv = kernel[((o * st.in_ch + c) * 3 + ky) * 3 + kx];
            for (std::size_t y = 0; y < st.h; ++y) {
              double* orow = out + y * st.w;
              const double* irow = in + (y + ky) * pw + kx;
              for (std::size_t x = 0; x < st.w; ++x) orow[x] += kv * irow[x];
            }
          }
      }
      for (std::size_t i = 0; i < plane; ++i) out[i] = std::max(out[i], 0.0);
    }
  }

  static void max_pool(const Stage& st, Buffers& b) {
    const std::size_t plane = st.h * st.w;
    for (std::size_t o = 0; o < st.out_ch; ++o)
      for (std::size_t y = 0; y < st.ph; ++y)
        for (std::size_t x = 0; x < st.pw; ++x) {
          std::size_t best = o * plane + (2 * y) * st.w + 2 * x;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = o * plane + (2 * y + dy) * st.w + 2 * x + dx;
              if (b.act[idx] > b.act[best]) best = idx;
            }
          const std::size_t out = (o * st.ph + y) * st.pw + x;
          b.pooled[out] = b.act[best];
          b.argmax[out] = std::uint32_t(best);
        }
  }

  const ModelWeights& w_;
  std::vector<Stage> stages_;
  std::vector<Buffers> buffers_;
  std::size_t features_ = 0;
  std::size_t height_ = 0, width_ = 0;
  std::vector<double> input_;
  std::span<const double> flat_;
  std::array<double, kNumClasses> logits_{};
  std::vector<double> d_flat_, d_act_, d_in_pad_, d_prev_, d_hold_;
};

std::array<double, kNumClasses> softmax(const std::array<double, kNumClasses>& z) {
  const double peak = std::max(z[0], z[1]);
  std::array<double, kNumClasses> p{std::exp(z[0] - peak), std::exp(z[1] - peak)};
  const double sum = p[0] + p[1];
  p[0] /= sum;
  p[1] /= sum;
  return p;
}

}  // namespace

std::size_t param_count(const ModelSpec& spec) {
  std::size_t total = 0;
  for (const auto& shape : tensor_shapes(spec)) total += shape_size(shape);
  return total;
}

ModelWeights build_model(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  ModelWeights w;
  for (const auto& shape : tensor_shapes(spec)) {
    Tensor t{shape, std::vector<double>(shape_size(shape), 0.0)};
    if (shape.size() > 1) {
      const std::size_t fan_in = t.size() / shape[0];
      const double limit = std::sqrt(6.0 / double(fan_in));
      // Stored at float precision so weights survive the wire format unchanged.
      for (double& v : t.values) v = double(float((2.0 * rng.uniform() - 1.0) * limit));
    }
    w.tensors.push_back(std::move(t));
  }
  return w;
}

ModelWeights zeros_like(const ModelWeights& w) {
  ModelWeights z;
  z.tensors.reserve(w.tensors.size());
  for (const Tensor& t : w.tensors) z.tensors.push_back({t.shape, std::vector<double>(t.size(), 0.0)});
  return z;
}

std::array<double, kNumClasses> logits(const ModelWeights& w, std::span<const float> pixels, std::size_t height,
                                       std::size_t width) {
  Evaluator ev(w, height, width);
  return ev.run(pixels);
}

std::array<double, kNumClasses> forward(const ModelWeights& w, std::span<const float> pixels, std::size_t height,
                                        std::size_t width) {
  return softmax(logits(w, pixels, height, width));
}

std::array<double, kNumClasses> forward(const ModelWeights& w, const ScatterImage& image) {
  return forward(w, image.pixels, image.height, image.width);
}

int predict(const ModelWeights& w, const ScatterImage& image) {
  const auto z = logits(w, image.pixels, image.height, image.width);
  return z[1] > z[0] ? 1 : 0;
}

LossAndGradients loss_and_gradients(const ModelWeights& w, std::span<const ScatterImage> images,
                                    std::span<const std::size_t> indices) {
  if (indices.empty()) throw InvalidInput("empty batch");
  const ScatterImage& first = images[indices.front()];
  Evaluator ev(w, first.height, first.width);
  LossAndGradients out{0.0, zeros_like(w), 0};
  const double scale = 1.0 / double(indices.size());
  for (std::size_t idx : indices) {
    const ScatterImage& im = images[idx];
    if (im.height != first.height || im.width != first.width) throw DimensionError("mixed image sizes in batch");
    const auto z = ev.run(im.pixels);
    const int label = im.label_index();
    out.correct += (z[1] > z[0] ? 1 : 0) == label;
    out.loss += ev.backward(label, out.gradients, scale);
  }
  out.loss *= scale;
  return out;
}

LossAndGradients loss_and_gradients(const ModelWeights& w, std::span<const ScatterImage> batch) {
  std::vector<std::size_t> indices(batch.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  return loss_and_gradients(w, batch, indices);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidInput("learning rate must be >= 0");
  if (batch_size == 0) throw InvalidInput("batch size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidInput("betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
}

OptimizerState OptimizerState::for_weights(const ModelWeights& w) {
  OptimizerState s;
  for (const Tensor& t : w.tensors) {
    s.first_moment.emplace_back(t.size(), 0.0);
    s.second_moment.emplace_back(t.size(), 0.0);
  }
  return s;
}

void adam_step(ModelWeights& w, OptimizerState& state, const ModelWeights& gradients, const TrainConfig& cfg) {
  if (state.first_moment.size() != w.tensors.size() || gradients.tensors.size() != w.tensors.size())
    throw DimensionError("optimizer state does not match the weights");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (std::size_t t = 0; t < w.tensors.size(); ++t) {
    auto& values = w.tensors[t].values;
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    const auto& g = gradients.tensors[t].values;
    if (m.size() != values.size() || v.size() != values.size() || g.size() != values.size())
      throw DimensionError("optimizer state does not match the weights");
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      values[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
  }
}

TrainResult train(ModelWeights w, OptimizerState state, std::span<const ScatterImage> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidInput("cannot train on an empty dataset");
  if (state.first_moment.empty() && state.step == 0) state = OptimizerState::for_weights(w);

  TrainResult result;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.shuffle_seed, epoch));
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng.uniform_index(i + 1)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const auto batch = std::span<const std::size_t>(order).subspan(start, len);
      const LossAndGradients lg = loss_and_gradients(w, data, batch);
      adam_step(w, state, lg.gradients, cfg);
      loss_sum += lg.loss * double(len);
      correct += lg.correct;
    }
    result.history.push_back({loss_sum / double(data.size()), double(correct) / double(data.size())});
  }
  result.weights = std::move(w);
  result.state = std::move(state);
  return result;
}

ConfusionMatrix evaluate(const ModelWeights& w, std::span<const ScatterImage> data) {
  ConfusionMatrix cm;
  if (data.empty()) return cm;
  Evaluator ev(w, data.front().height, data.front().width);
  for (const ScatterImage& im : data) {
    const auto z = ev.run(im.pixels);
    cm.record(im.label_index(), z[1] > z[0] ? 1 : 0);
  }
  return cm;
}

namespace {
constexpr std::uint8_t kWeightsMagic[4] = {'F', 'L', 'W', 'T'};
}

Bytes serialize_weights(const ModelWeights& w) {
  if (w.tensors.size() > 0xffff) throw InvalidInput("too many tensors");
  Bytes out;
  out.reserve(8 + w.tensors.size() * 17 + w.param_count() * 4);
  ByteWriter bw(out);
  bw.put_bytes(kWeightsMagic);
  bw.put<std::uint16_t>(kWeightsFormatVersion);
  bw.put<std::uint16_t>(std::uint16_t(w.tensors.size()));
  for (const Tensor& t : w.tensors) {
    if (t.shape.size() > 0xff) throw InvalidInput("tensor rank too large");
    bw.put<std::uint8_t>(std::uint8_t(t.shape.size()));
    for (std::uint32_t d : t.shape) bw.put<std::uint32_t>(d);
  }
  for (const Tensor& t : w.tensors)
    for (double v : t.values) bw.put<float>(float(v));
  return out;
}

ModelWeights deserialize_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, kWeightsMagic))
    throw CorruptWeights("bad magic");
  ByteReader<CorruptWeights> r(bytes);
  r.get_bytes(4);
  if (r.get<std::uint16_t>() != kWeightsFormatVersion) throw CorruptWeights("unsupported weights version");
  const std::uint16_t count = r.get<std::uint16_t>();

  ModelWeights w;
  w.tensors.resize(count);
  std::size_t total = 0;
  for (Tensor& t : w.tensors) {
    const std::uint8_t rank = r.get<std::uint8_t>();
    if (rank == 0 || rank > 4) throw CorruptWeights("invalid tensor rank");
    std::size_t n = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      const std::uint32_t d = r.get<std::uint32_t>();
      if (d == 0) throw CorruptWeights("zero tensor dimension");
      t.shape.push_back(d);
      if (n > bytes.size() / d) throw CorruptWeights("tensor larger than the file");
      n *= d;
    }
    total += n;
    if (total > bytes.size()) throw CorruptWeights("tensors larger than the file");
  }
  if (r.remaining() != total * 4) throw CorruptWeights("payload size does not match the header");
  for (Tensor& t : w.tensors) {
    t.values.resize(shape_size(t.shape));
    for (double& v : t.values) v = double(r.get<float>());
  }
  check_structure<CorruptWeights>(w);
  return w;
}

void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_weights(w));
}

ModelWeights load_weights(const std::filesystem::path& path) { return deserialize_weights(read_file(path)); }

}  // namespace fedguard
