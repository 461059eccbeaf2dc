#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "futi/random.hpp"
#include "futi/tensor.hpp"

namespace futi::nn {

enum class Mode { train, eval };

/// Numeric tags double as the checkpoint encoding; never renumber.
enum class LayerKind : std::uint32_t {
  dense = 1,
  conv2d = 2,
  maxpool2d = 3,
  avgpool2d = 4,
  relu = 5,
  dropout = 6,
  flatten = 7,
  concat = 8,
};

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::avgpool2d: return "avgpool2d";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::concat: return "concat";
  }
  return "unknown";
}

/// One gradient tensor per parameter tensor, same order as Model::parameters().
template <typename T>
using GradientSet = std::vector<Tensor<T>>;

struct SGDConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("learning rate must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  }
};

// ---------------------------------------------------------------------------
// Stateless kernels

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weights, 2, "dense weights");
  if (input.dim(1) != weights.dim(0))
    throw ShapeError("dense input " + shape_str(input.shape()) + " does not match weights " +
                     shape_str(weights.shape()));
  if (bias.shape() != Shape{weights.dim(1)})
    throw ShapeError("dense bias " + shape_str(bias.shape()) + " does not match weights " +
                     shape_str(weights.shape()));
  Tensor<T> y = matmul(input, weights);
  const std::size_t N = y.dim(0), M = y.dim(1);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < M; ++j) y[i * M + j] += bias[j];
  return y;
}

/// Inverted dropout. Returns the output and writes the applied scale mask.
template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, Mode mode, Rng& rng,
                  std::vector<T>* mask_out = nullptr) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::eval || rate == 0.0) {
    if (mask_out) mask_out->assign(input.size(), T{1});
    return input;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(input.size());
  for (auto& m : mask) m = rng.uniform() < rate ? T{0} : keep_scale;
  Tensor<T> y(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) y[i] = input[i] * mask[i];
  if (mask_out) *mask_out = std::move(mask);
  return y;
}

/// Mean over samples of -log p[i, label_i], probabilities clamped at 1e-12.
template <typename T>
T cross_entropy(const Tensor<T>& probs, std::span<const std::size_t> labels) {
  require_rank(probs, 2, "cross_entropy");
  const std::size_t N = probs.dim(0), K = probs.dim(1);
  if (labels.size() != N)
    throw ShapeError("cross_entropy got " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(N) + " rows");
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (labels[i] >= K)
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0," +
                              std::to_string(K) + ")");
    const double p = std::max(static_cast<double>(probs[i * K + labels[i]]), 1e-12);
    total -= std::log(p);
  }
  return static_cast<T>(total / static_cast<double>(N));
}

/// Gradient of mean cross-entropy w.r.t. the pre-softmax logits: (p - onehot)/N.
template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& probs, std::span<const std::size_t> labels) {
  const std::size_t N = probs.dim(0), K = probs.dim(1);
  Tensor<T> g = probs;
  const T inv = T{1} / static_cast<T>(N);
  for (std::size_t i = 0; i < N; ++i) {
    g[i * K + labels[i]] -= T{1};
    for (std::size_t k = 0; k < K; ++k) g[i * K + k] *= inv;
  }
  return g;
}

/// Joins [N,A] and [N,B] into [N,A+B].
template <typename T>
Tensor<T> concat_features(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "concat lhs");
  require_rank(b, 2, "concat rhs");
  if (a.dim(0) != b.dim(0))
    throw ShapeError("concat batch sizes differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const std::size_t N = a.dim(0), A = a.dim(1), B = b.dim(1);
  Tensor<T> y({N, A + B});
  for (std::size_t i = 0; i < N; ++i) {
    std::copy_n(a.data() + i * A, A, y.data() + i * (A + B));
    std::copy_n(b.data() + i * B, B, y.data() + i * (A + B) + A);
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_features(const Tensor<T>& g, std::size_t left_width) {
  require_rank(g, 2, "concat gradient");
  const std::size_t N = g.dim(0), W = g.dim(1);
  if (left_width == 0 || left_width >= W)
    throw ShapeError("cannot split width " + std::to_string(W) + " at " +
                     std::to_string(left_width));
  const std::size_t B = W - left_width;
  Tensor<T> a({N, left_width}), b({N, B});
  for (std::size_t i = 0; i < N; ++i) {
    std::copy_n(g.data() + i * W, left_width, a.data() + i * left_width);
    std::copy_n(g.data() + i * W + left_width, B, b.data() + i * B);
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Layers

/// A trainable stage. forward caches what backward needs; backward
/// accumulates parameter gradients and returns the input gradient.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  /// Per-sample output shape for a per-sample input shape.
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual std::vector<double> hyperparameters() const { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual std::vector<Tensor<T>*> parameters() { return {}; }
  virtual std::vector<Tensor<T>*> gradients() { return {}; }

  std::vector<const Tensor<T>*> parameters() const {
    auto ps = const_cast<Layer*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  void zero_grad() {
    for (auto* g : gradients()) g->fill(T{0});
  }
};

namespace detail {

inline Shape with_batch(std::size_t n, const Shape& per_sample) {
  Shape s{n};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

inline Shape per_sample(const Shape& s) { return Shape(s.begin() + 1, s.end()); }

template <typename T>
void he_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-limit, limit));
}

}  // namespace detail

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out)
      : weights_({in, out}), bias_({out}), gw_({in, out}), gb_({out}) {}

  void init(Rng& rng) {
    detail::he_uniform(weights_, weights_.dim(0), rng);
    bias_.fill(T{0});
  }

  LayerKind kind() const override { return LayerKind::dense; }
  std::size_t in_features() const { return weights_.dim(0); }
  std::size_t out_features() const { return weights_.dim(1); }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    input_ = x;
    return dense_forward(x, weights_, bias_);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dw = matmul_tn(input_, g);
    for (std::size_t i = 0; i < dw.size(); ++i) gw_[i] += dw[i];
    const std::size_t N = g.dim(0), M = g.dim(1);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < M; ++j) gb_[j] += g[i * M + j];
    return matmul_nt(g, weights_);
  }

  Shape output_shape(const Shape& in) const override {
    if (in != Shape{in_features()})
      throw ShapeError("dense layer expects per-sample shape [" + std::to_string(in_features()) +
                       "], got " + shape_str(in));
    return {out_features()};
  }
  std::vector<double> hyperparameters() const override {
    return {static_cast<double>(in_features()), static_cast<double>(out_features())};
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  std::vector<Tensor<T>*> parameters() override { return {&weights_, &bias_}; }
  std::vector<Tensor<T>*> gradients() override { return {&gw_, &gb_}; }

 private:
  Tensor<T> weights_, bias_, gw_, gb_, input_;
};

template <typename T>
class Conv2D final : public Layer<T> {
 public:
  explicit Conv2D(const Conv2DSpec& spec)
      : spec_(spec),
        weights_(spec.weight_shape()),
        bias_({spec.out_channels}),
        gw_(spec.weight_shape()),
        gb_({spec.out_channels}) {
    spec_.validate();
  }

  void init(Rng& rng) {
    detail::he_uniform(weights_, spec_.in_channels * spec_.kernel_h * spec_.kernel_w, rng);
    bias_.fill(T{0});
  }

  LayerKind kind() const override { return LayerKind::conv2d; }
  const Conv2DSpec& spec() const { return spec_; }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    input_ = x;
    return conv2d(x, weights_, bias_, spec_);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    auto grads = conv2d_backward(input_, weights_, spec_, g);
    for (std::size_t i = 0; i < gw_.size(); ++i) gw_[i] += grads.weights[i];
    for (std::size_t i = 0; i < gb_.size(); ++i) gb_[i] += grads.bias[i];
    return std::move(grads.input);
  }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != spec_.in_channels)
      throw ShapeError("conv2d layer expects [" + std::to_string(spec_.in_channels) +
                       ",H,W], got " + shape_str(in));
    return {spec_.out_channels, spec_.out_extent(in[1], spec_.kernel_h),
            spec_.out_extent(in[2], spec_.kernel_w)};
  }
  std::vector<double> hyperparameters() const override {
    return {double(spec_.in_channels), double(spec_.out_channels), double(spec_.kernel_h),
            double(spec_.kernel_w),    double(spec_.stride),       double(spec_.padding)};
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2D>(*this); }
  std::vector<Tensor<T>*> parameters() override { return {&weights_, &bias_}; }
  std::vector<Tensor<T>*> gradients() override { return {&gw_, &gb_}; }

 private:
  Conv2DSpec spec_;
  Tensor<T> weights_, bias_, gw_, gb_, input_;
};

template <typename T>
class MaxPool2D final : public Layer<T> {
 public:
  MaxPool2D(std::size_t window, std::size_t stride) : window_(window), stride_(stride) {}

  LayerKind kind() const override { return LayerKind::maxpool2d; }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    auto r = maxpool2d(x, window_, stride_);
    input_shape_ = x.shape();
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    return maxpool2d_backward(g, argmax_, input_shape_);
  }
  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3) throw ShapeError("maxpool2d expects [C,H,W], got " + shape_str(in));
    return {in[0], pool_extent(in[1], window_, stride_), pool_extent(in[2], window_, stride_)};
  }
  std::vector<double> hyperparameters() const override {
    return {double(window_), double(stride_)};
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2D>(*this); }

 private:
  std::size_t window_, stride_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class AvgPool2D final : public Layer<T> {
 public:
  AvgPool2D(std::size_t window, std::size_t stride) : window_(window), stride_(stride) {}

  LayerKind kind() const override { return LayerKind::avgpool2d; }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    input_shape_ = x.shape();
    return avgpool2d(x, window_, stride_);
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    return avgpool2d_backward(g, input_shape_, window_, stride_);
  }
  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3) throw ShapeError("avgpool2d expects [C,H,W], got " + shape_str(in));
    return {in[0], pool_extent(in[1], window_, stride_), pool_extent(in[2], window_, stride_)};
  }
  std::vector<double> hyperparameters() const override {
    return {double(window_), double(stride_)};
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<AvgPool2D>(*this); }

 private:
  std::size_t window_, stride_;
  Shape input_shape_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::relu; }
  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    Tensor<T> y = relu(x);
    output_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = output_[i] > T{0} ? g[i] : T{0};
    return gx;
  }
  Shape output_shape(const Shape& in) const override { return in; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  Tensor<T> output_;
};

template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0))
      throw std::invalid_argument("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  LayerKind kind() const override { return LayerKind::dropout; }
  double rate() const { return rate_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override {
    return dropout(x, rate_, mode, rng, &mask_);
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * mask_[i];
    return gx;
  }
  Shape output_shape(const Shape& in) const override { return in; }
  std::vector<double> hyperparameters() const override { return {rate_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dropout>(*this); }

 private:
  double rate_;
  std::vector<T> mask_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::flatten; }
  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    input_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }
  Tensor<T> backward(const Tensor<T>& g) override { return g.reshaped(input_shape_); }
  Shape output_shape(const Shape& in) const override { return {shape_numel(in)}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  Shape input_shape_;
};

/// Ordered chain of layers with value semantics.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& o) {
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& o) {
    if (this != &o) {
      Sequential tmp(o);
      layers_.swap(tmp.layers_);
    }
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L>
  L& add(L layer) {
    auto p = std::make_unique<L>(std::move(layer));
    L& ref = *p;
    layers_.push_back(std::move(p));
    return ref;
  }
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  bool empty() const { return layers_.empty(); }
  std::size_t size() const { return layers_.size(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }
  const Layer<T>& operator[](std::size_t i) const { return *layers_[i]; }

  Tensor<T> forward(Tensor<T> x, Mode mode, Rng& rng) {
    for (auto& l : layers_) x = l->forward(x, mode, rng);
    return x;
  }
  Tensor<T> backward(Tensor<T> g) {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }
  Shape output_shape(Shape s) const {
    for (const auto& l : layers_) s = l->output_shape(s);
    return s;
  }
  void collect(std::vector<Tensor<T>*>& params, std::vector<Tensor<T>*>& grads) {
    for (auto& l : layers_) {
      for (auto* p : l->parameters()) params.push_back(p);
      for (auto* g : l->gradients()) grads.push_back(g);
    }
  }
  void zero_grad() {
    for (auto& l : layers_) l->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Builds a layer from its kind tag and hyperparameter list.
template <typename T>
std::unique_ptr<Layer<T>> make_layer(LayerKind kind, std::span<const double> hp) {
  auto need = [&](std::size_t n) {
    if (hp.size() != n)
      throw std::invalid_argument(std::string(kind_name(kind)) + " layer expects " +
                                  std::to_string(n) + " hyperparameters, got " +
                                  std::to_string(hp.size()));
  };
  auto dim = [](double v) {
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e12)
      throw std::invalid_argument("invalid layer dimension " + std::to_string(v));
    return static_cast<std::size_t>(v);
  };
  switch (kind) {
    case LayerKind::dense:
      need(2);
      if (!dim(hp[0]) || !dim(hp[1])) throw std::invalid_argument("dense extents must be positive");
      return std::make_unique<Dense<T>>(dim(hp[0]), dim(hp[1]));
    case LayerKind::conv2d:
      need(6);
      return std::make_unique<Conv2D<T>>(
          Conv2DSpec{dim(hp[0]), dim(hp[1]), dim(hp[2]), dim(hp[3]), dim(hp[4]), dim(hp[5])});
    case LayerKind::maxpool2d:
      need(2);
      return std::make_unique<MaxPool2D<T>>(dim(hp[0]), dim(hp[1]));
    case LayerKind::avgpool2d:
      need(2);
      return std::make_unique<AvgPool2D<T>>(dim(hp[0]), dim(hp[1]));
    case LayerKind::relu:
      need(0);
      return std::make_unique<ReLU<T>>();
    case LayerKind::dropout:
      need(1);
      return std::make_unique<Dropout<T>>(hp[0]);
    case LayerKind::flatten:
      need(0);
      return std::make_unique<Flatten<T>>();
    case LayerKind::concat:
      break;
  }
  throw std::invalid_argument("unknown layer kind tag " +
                              std::to_string(static_cast<std::uint32_t>(kind)));
}

}  // namespace futi::nn
