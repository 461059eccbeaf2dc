#pragma once

// Reference implementations used only by tests. They are written
// independently of the library kernels (different loop structure, no shared
// helpers) so agreement between the two is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "futi/nn.hpp"
#include "futi/random.hpp"
#include "futi/tensor.hpp"

namespace futi::test {

using Grid = std::vector<std::vector<double>>;

/// Direct quadruple loop over output pixels and kernel taps, padding by bounds check.
inline Tensor<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& w,
                                   const Tensor<double>& b, int stride, int pad) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int OH = (H + 2 * pad - KH) / stride + 1, OW = (W + 2 * pad - KW) / stride + 1;
  Tensor<double> y({std::size_t(N), std::size_t(O), std::size_t(OH), std::size_t(OW)});
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j) {
          double acc = b[o];
          for (int c = 0; c < C; ++c)
            for (int u = 0; u < KH; ++u)
              for (int v = 0; v < KW; ++v) {
                const int r = i * stride + u - pad, s = j * stride + v - pad;
                if (r >= 0 && r < H && s >= 0 && s < W) acc += w.at(o, c, u, v) * x.at(n, c, r, s);
              }
          y.at(n, o, i, j) = acc;
        }
  return y;
}

inline Tensor<double> naive_maxpool(const Tensor<double>& x, int window, int stride) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OH = (H - window) / stride + 1, OW = (W - window) / stride + 1;
  Tensor<double> y({std::size_t(N), std::size_t(C), std::size_t(OH), std::size_t(OW)});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j) {
          double m = -INFINITY;
          for (int u = 0; u < window; ++u)
            for (int v = 0; v < window; ++v) m = std::max(m, x.at(n, c, i * stride + u, j * stride + v));
          y.at(n, c, i, j) = m;
        }
  return y;
}

inline Tensor<double> naive_matmul(const Tensor<double>& a, const Tensor<double>& b) {
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  Tensor<double> c({M, N});
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < K; ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

/// Classic 3x3 LBP with neighbour bits E, NE, N, NW, W, SW, S, SE.
inline Tensor<std::uint32_t> sliding_window_lbp(const Tensor<double>& g) {
  const int H = g.dim(0), W = g.dim(1);
  static const int dr[8] = {0, -1, -1, -1, 0, 1, 1, 1};
  static const int dc[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  Tensor<std::uint32_t> out(g.shape());
  for (int r = 1; r < H - 1; ++r)
    for (int c = 1; c < W - 1; ++c) {
      std::uint32_t code = 0;
      for (int p = 0; p < 8; ++p)
        if (g.at(r + dr[p], c + dc[p]) >= g.at(r, c)) code += 1u << p;
      out.at(r, c) = code;
    }
  return out;
}

/// Bilinear sample at continuous source coordinate with half-pixel mapping,
/// written as an explicit weighted sum over the four nearest pixels.
inline double bilinear_at(const Tensor<double>& src, std::size_t oy, std::size_t ox,
                          std::size_t out_h, std::size_t out_w) {
  const double H = src.dim(0), W = src.dim(1);
  double sy = (oy + 0.5) * H / out_h - 0.5, sx = (ox + 0.5) * W / out_w - 0.5;
  sy = std::min(std::max(sy, 0.0), H - 1);
  sx = std::min(std::max(sx, 0.0), W - 1);
  double acc = 0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const double py = std::floor(sy) + dy, px = std::floor(sx) + dx;
      const double wy = 1 - std::abs(sy - py), wx = 1 - std::abs(sx - px);
      if (wy <= 0 || wx <= 0) continue;
      const auto iy = static_cast<std::size_t>(std::min(py, H - 1));
      const auto ix = static_cast<std::size_t>(std::min(px, W - 1));
      acc += wy * wx * src.at(iy, ix);
    }
  return acc;
}

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor<double> random_gray(std::size_t h, std::size_t w, Rng& rng) {
  Tensor<double> g({h, w});
  for (auto& v : g.values()) v = static_cast<double>(rng.below(256));
  return g;
}

/// Relative error used by every gradient check: |a-n| / max(|a|, |n|, 1e-6).
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

struct GradCheckResult {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

/// Central differences on `samples` randomly chosen coordinates of the given
/// tensors. `loss` must be a pure function of the tensor contents.
inline GradCheckResult finite_difference_check(const std::vector<Tensor<double>*>& params,
                                               const std::vector<Tensor<double>>& analytic,
                                               const std::function<double()>& loss,
                                               std::size_t samples, Rng& rng, double h = 1e-5) {
  std::size_t total = 0;
  for (auto* p : params) total += p->size();
  GradCheckResult r;
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t flat = rng.below(total), t = 0;
    while (flat >= params[t]->size()) flat -= params[t++]->size();
    double& v = (*params[t])[flat];
    const double saved = v;
    v = saved + h;
    const double up = loss();
    v = saved - h;
    const double down = loss();
    v = saved;
    const double numeric = (up - down) / (2 * h);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic[t][flat], numeric));
    ++r.checked;
  }
  return r;
}

/// Checks a layer's parameter and input gradients against central differences
/// of the scalar loss sum(proj * layer(x)). Dropout masks repeat because every
/// evaluation reseeds the same generator.
inline GradCheckResult layer_gradient_check(nn::Layer<double>& layer, const Shape& input_shape,
                                            nn::Mode mode, std::uint64_t seed,
                                            std::size_t samples = 300) {
  constexpr std::uint64_t kMaskSeed = 99;
  Rng rng(seed);
  Tensor<double> x = random_tensor(input_shape, rng);
  const Shape out_shape = nn::detail::with_batch(
      input_shape[0], layer.output_shape(nn::detail::per_sample(input_shape)));
  const Tensor<double> proj = random_tensor(out_shape, rng);

  auto loss = [&] {
    Rng r(kMaskSeed);
    auto y = layer.forward(x, mode, r);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
    return s;
  };

  layer.zero_grad();
  loss();
  Tensor<double> gx = layer.backward(proj);

  std::vector<Tensor<double>*> params = layer.parameters();
  std::vector<Tensor<double>> analytic;
  for (auto* g : layer.gradients()) analytic.push_back(*g);
  params.push_back(&x);
  analytic.push_back(gx);
  return finite_difference_check(params, analytic, loss, samples, rng);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("futi_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace futi::test
