#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace futi {

using Shape = std::vector<std::size_t>;

/// Raised for any tensor extent or layout violation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array. The shape is fixed at construction.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_numel(shape_), T{0});
  }

  Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (shape_numel(shape_) != data_.size())
      throw ShapeError("tensor shape " + shape_str(shape_) + " holds " +
                       std::to_string(shape_numel(shape_)) + " elements but " +
                       std::to_string(data_.size()) + " were supplied");
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::vector<T>& values() & noexcept { return data_; }
  const std::vector<T>& values() const& noexcept { return data_; }
  // Safe in range-for over a temporary tensor.
  std::vector<T> values() && noexcept { return std::move(data_); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... I>
  T& at(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const T& at(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  /// Copy with a different shape of equal element count.
  Tensor reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != data_.size())
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(new_shape));
    return Tensor(std::move(new_shape), data_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  void validate_shape() const {
    for (auto e : shape_)
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size())
      throw ShapeError("index rank " + std::to_string(idx.size()) + " does not match tensor " +
                       shape_str(shape_));
    std::size_t off = 0, d = 0;
    for (auto i : idx) {
      if (i >= shape_[d]) throw std::out_of_range("tensor index out of range");
      off = off * shape_[d] + i;
      ++d;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + " expects a rank-" + std::to_string(rank) +
                     " tensor, got " + shape_str(t.shape()));
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
  for (const T& v : t.values())
    if (!std::isfinite(v)) throw std::domain_error(std::string(what) + ": non-finite input");
}

// ---------------------------------------------------------------------------
// Convolution

struct Conv2DSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;

  void validate() const {
    if (!in_channels || !out_channels || !kernel_h || !kernel_w || !stride)
      throw ShapeError("conv2d spec fields must be positive");
  }

  Shape weight_shape() const { return {out_channels, in_channels, kernel_h, kernel_w}; }

  /// floor((in + 2p - k)/s) + 1; throws when it would be < 1.
  std::size_t out_extent(std::size_t in, std::size_t kernel) const {
    if (in + 2 * padding < kernel)
      throw ShapeError("conv2d kernel " + std::to_string(kernel) + " exceeds padded input extent " +
                       std::to_string(in + 2 * padding));
    return (in + 2 * padding - kernel) / stride + 1;
  }
};

template <typename T>
struct Conv2DGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

namespace detail {

template <typename T>
void check_conv_args(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                     const Conv2DSpec& spec) {
  spec.validate();
  require_rank(input, 4, "conv2d input");
  if (input.dim(1) != spec.in_channels)
    throw ShapeError("conv2d input " + shape_str(input.shape()) + " has " +
                     std::to_string(input.dim(1)) + " channels, spec expects " +
                     std::to_string(spec.in_channels));
  if (weights.shape() != spec.weight_shape())
    throw ShapeError("conv2d weights " + shape_str(weights.shape()) + " do not match spec " +
                     shape_str(spec.weight_shape()));
  if (bias.shape() != Shape{spec.out_channels})
    throw ShapeError("conv2d bias " + shape_str(bias.shape()) + " does not match out_channels " +
                     std::to_string(spec.out_channels));
}

}  // namespace detail

/// Cross-correlation (no kernel flip) with zero padding, NCHW.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                 const Conv2DSpec& spec) {
  detail::check_conv_args(input, weights, bias, spec);
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t O = spec.out_channels, KH = spec.kernel_h, KW = spec.kernel_w;
  const std::size_t OH = spec.out_extent(H, KH), OW = spec.out_extent(W, KW);
  const long pad = static_cast<long>(spec.padding);
  const long stride = static_cast<long>(spec.stride);

  Tensor<T> out({N, O, OH, OW});
  const T* x = input.data();
  const T* w = weights.data();
  T* y = out.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < O; ++o) {
      T* yplane = y + (n * O + o) * OH * OW;
      std::fill(yplane, yplane + OH * OW, bias[o]);
      for (std::size_t c = 0; c < C; ++c) {
        const T* xplane = x + (n * C + c) * H * W;
        for (std::size_t kh = 0; kh < KH; ++kh) {
          for (std::size_t kw = 0; kw < KW; ++kw) {
            const T wv = w[((o * C + c) * KH + kh) * KW + kw];
            for (std::size_t oh = 0; oh < OH; ++oh) {
              const long ih = static_cast<long>(oh) * stride + static_cast<long>(kh) - pad;
              if (ih < 0 || ih >= static_cast<long>(H)) continue;
              const T* xrow = xplane + ih * W;
              T* yrow = yplane + oh * OW;
              for (std::size_t ow = 0; ow < OW; ++ow) {
                const long iw = static_cast<long>(ow) * stride + static_cast<long>(kw) - pad;
                if (iw < 0 || iw >= static_cast<long>(W)) continue;
                yrow[ow] += wv * xrow[iw];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Conv2DGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                               const Conv2DSpec& spec, const Tensor<T>& grad_out) {
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t O = spec.out_channels, KH = spec.kernel_h, KW = spec.kernel_w;
  const std::size_t OH = spec.out_extent(H, KH), OW = spec.out_extent(W, KW);
  if (grad_out.shape() != Shape{N, O, OH, OW})
    throw ShapeError("conv2d gradient " + shape_str(grad_out.shape()) +
                     " does not match output shape " + shape_str({N, O, OH, OW}));
  const long pad = static_cast<long>(spec.padding);
  const long stride = static_cast<long>(spec.stride);

  Conv2DGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), Tensor<T>({O})};
  const T* x = input.data();
  const T* w = weights.data();
  const T* gy = grad_out.data();
  T* gx = g.input.data();
  T* gw = g.weights.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < O; ++o) {
      const T* gplane = gy + (n * O + o) * OH * OW;
      T bsum = 0;
      for (std::size_t i = 0; i < OH * OW; ++i) bsum += gplane[i];
      g.bias[o] += bsum;
      for (std::size_t c = 0; c < C; ++c) {
        const T* xplane = x + (n * C + c) * H * W;
        T* gxplane = gx + (n * C + c) * H * W;
        for (std::size_t kh = 0; kh < KH; ++kh) {
          for (std::size_t kw = 0; kw < KW; ++kw) {
            const std::size_t widx = ((o * C + c) * KH + kh) * KW + kw;
            const T wv = w[widx];
            T wsum = 0;
            for (std::size_t oh = 0; oh < OH; ++oh) {
              const long ih = static_cast<long>(oh) * stride + static_cast<long>(kh) - pad;
              if (ih < 0 || ih >= static_cast<long>(H)) continue;
              const T* xrow = xplane + ih * W;
              T* gxrow = gxplane + ih * W;
              const T* grow = gplane + oh * OW;
              for (std::size_t ow = 0; ow < OW; ++ow) {
                const long iw = static_cast<long>(ow) * stride + static_cast<long>(kw) - pad;
                if (iw < 0 || iw >= static_cast<long>(W)) continue;
                wsum += grow[ow] * xrow[iw];
                gxrow[iw] += grow[ow] * wv;
              }
            }
            gw[widx] += wsum;
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Pooling

inline std::size_t pool_extent(std::size_t in, std::size_t window, std::size_t stride) {
  if (!window || !stride) throw ShapeError("pooling window and stride must be positive");
  if (window > in)
    throw ShapeError("pooling window " + std::to_string(window) + " larger than input extent " +
                     std::to_string(in));
  return (in - window) / stride + 1;
}

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  /// Flat index into the input of the winning element, one per output element.
  std::vector<std::size_t> argmax;
};

/// Ties resolve to the lowest flat input index.
template <typename T>
MaxPoolResult<T> maxpool2d(const Tensor<T>& input, std::size_t window, std::size_t stride) {
  require_rank(input, 4, "maxpool2d input");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t OH = pool_extent(H, window, stride), OW = pool_extent(W, window, stride);
  MaxPoolResult<T> r{Tensor<T>({N, C, OH, OW}), std::vector<std::size_t>(N * C * OH * OW)};
  std::size_t k = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t oh = 0; oh < OH; ++oh) {
      for (std::size_t ow = 0; ow < OW; ++ow, ++k) {
        std::size_t best = base + (oh * stride) * W + ow * stride;
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = base + (oh * stride + i) * W + (ow * stride + j);
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[k] = input[best];
        r.argmax[k] = best;
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                             const Shape& input_shape) {
  if (grad_out.size() != argmax.size())
    throw ShapeError("maxpool2d gradient " + shape_str(grad_out.shape()) +
                     " does not match stored argmax count " + std::to_string(argmax.size()));
  Tensor<T> gx(input_shape);
  for (std::size_t k = 0; k < argmax.size(); ++k) gx[argmax[k]] += grad_out[k];
  return gx;
}

template <typename T>
Tensor<T> avgpool2d(const Tensor<T>& input, std::size_t window, std::size_t stride) {
  require_rank(input, 4, "avgpool2d input");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t OH = pool_extent(H, window, stride), OW = pool_extent(W, window, stride);
  Tensor<T> out({N, C, OH, OW});
  const T inv = T{1} / static_cast<T>(window * window);
  std::size_t k = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t oh = 0; oh < OH; ++oh)
      for (std::size_t ow = 0; ow < OW; ++ow, ++k) {
        T s = 0;
        for (std::size_t i = 0; i < window; ++i)
          for (std::size_t j = 0; j < window; ++j)
            s += input[base + (oh * stride + i) * W + (ow * stride + j)];
        out[k] = s * inv;
      }
  }
  return out;
}

template <typename T>
Tensor<T> avgpool2d_backward(const Tensor<T>& grad_out, const Shape& input_shape,
                             std::size_t window, std::size_t stride) {
  const std::size_t N = input_shape.at(0), C = input_shape.at(1), H = input_shape.at(2),
                    W = input_shape.at(3);
  const std::size_t OH = pool_extent(H, window, stride), OW = pool_extent(W, window, stride);
  if (grad_out.shape() != Shape{N, C, OH, OW})
    throw ShapeError("avgpool2d gradient " + shape_str(grad_out.shape()) +
                     " does not match output shape " + shape_str({N, C, OH, OW}));
  Tensor<T> gx(input_shape);
  const T inv = T{1} / static_cast<T>(window * window);
  std::size_t k = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t oh = 0; oh < OH; ++oh)
      for (std::size_t ow = 0; ow < OW; ++ow, ++k) {
        const T g = grad_out[k] * inv;
        for (std::size_t i = 0; i < window; ++i)
          for (std::size_t j = 0; j < window; ++j)
            gx[base + (oh * stride + i) * W + (ow * stride + j)] += g;
      }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Dense algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  if (b.dim(0) != K)
    throw ShapeError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  Tensor<T> c({M, N});
  for (std::size_t i = 0; i < M; ++i) {
    T* crow = c.data() + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      const T av = a[i * K + k];
      const T* brow = b.data() + k * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

/// aᵀ · b without materializing the transpose.
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul_tn lhs");
  require_rank(b, 2, "matmul_tn rhs");
  const std::size_t K = a.dim(0), M = a.dim(1), N = b.dim(1);
  if (b.dim(0) != K)
    throw ShapeError("matmul_tn dimensions disagree: " + shape_str(a.shape()) + "^T x " +
                     shape_str(b.shape()));
  Tensor<T> c({M, N});
  for (std::size_t k = 0; k < K; ++k) {
    const T* arow = a.data() + k * M;
    const T* brow = b.data() + k * N;
    for (std::size_t i = 0; i < M; ++i) {
      const T av = arow[i];
      T* crow = c.data() + i * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

/// a · bᵀ without materializing the transpose.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul_nt lhs");
  require_rank(b, 2, "matmul_nt rhs");
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(0);
  if (b.dim(1) != K)
    throw ShapeError("matmul_nt dimensions disagree: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  Tensor<T> c({M, N});
  for (std::size_t i = 0; i < M; ++i) {
    const T* arow = a.data() + i * K;
    for (std::size_t j = 0; j < N; ++j) {
      const T* brow = b.data() + j * K;
      T s = 0;
      for (std::size_t k = 0; k < K; ++k) s += arow[k] * brow[k];
      c[i * N + j] = s;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Activations

/// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank(logits, 2, "softmax");
  require_finite(logits, "softmax");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (std::size_t i = 0; i < N; ++i) {
    const T* row = logits.data() + i * K;
    T* out = p.data() + i * K;
    const T mx = *std::max_element(row, row + K);
    T sum = 0;
    for (std::size_t k = 0; k < K; ++k) {
      out[k] = std::exp(row[k] - mx);
      sum += out[k];
    }
    for (std::size_t k = 0; k < K; ++k) out[k] /= sum;
  }
  return p;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  require_finite(x, "relu");
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

/// Index of the row maximum; ties go to the lowest index.
template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& m) {
  require_rank(m, 2, "argmax_rows");
  const std::size_t N = m.dim(0), K = m.dim(1);
  std::vector<std::size_t> out(N);
  for (std::size_t i = 0; i < N; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (m[i * K + k] > m[i * K + best]) best = k;
    out[i] = best;
  }
  return out;
}

}  // namespace futi
