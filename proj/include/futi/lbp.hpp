#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "futi/tensor.hpp"

namespace futi::lbp {

enum class Interpolation { nearest, bilinear };

struct LBPConfig {
  int points = 8;       // P
  double radius = 1.0;  // R
  Interpolation interpolation = Interpolation::nearest;

  void validate() const {
    if (points < 4 || points > 24)
      throw std::invalid_argument("LBP point count must lie in [4, 24], got " +
                                  std::to_string(points));
    if (!(radius >= 1.0)) throw std::invalid_argument("LBP radius must be >= 1");
  }
  std::size_t bins() const { return std::size_t{1} << points; }
  /// Width of the border band that receives no code.
  std::size_t margin() const { return static_cast<std::size_t>(std::ceil(radius)); }

  bool operator==(const LBPConfig&) const = default;
};

/// Normalized (or raw-count) histogram of interior LBP codes.
struct LBPFeatures {
  std::vector<double> histogram;
  LBPConfig config;
  bool normalized = true;
};

/// Luma 0.299 R + 0.587 G + 0.114 B of a [3,H,W] image, clamped to [0,255].
template <typename T>
Tensor<T> to_grayscale(const Tensor<T>& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3)
    throw ShapeError("to_grayscale expects a [3,H,W] image, got " + shape_str(rgb.shape()));
  const std::size_t H = rgb.dim(1), W = rgb.dim(2), plane = H * W;
  Tensor<T> g({H, W});
  for (std::size_t i = 0; i < plane; ++i) {
    const T r = rgb[i], gr = rgb[plane + i], b = rgb[2 * plane + i];
    T v = (r == gr && gr == b) ? r : T(0.299) * r + T(0.587) * gr + T(0.114) * b;
    g[i] = std::clamp(v, T{0}, T{255});
  }
  return g;
}

/// sum_p s(g_p - g_c) 2^p with s(x) = 1 for x >= 0.
template <typename T>
std::uint32_t lbp_code(T center, std::span<const T> neighbors, int points) {
  if (static_cast<int>(neighbors.size()) != points)
    throw std::invalid_argument("lbp_code expects " + std::to_string(points) +
                                " neighbors, got " + std::to_string(neighbors.size()));
  std::uint32_t code = 0;
  for (int p = 0; p < points; ++p)
    if (neighbors[p] - center >= T{0}) code |= std::uint32_t{1} << p;
  return code;
}

struct Offset {
  double dy;
  double dx;
};

/// Sampling offsets: p = 0 due east, counter-clockwise (row axis points down).
inline std::vector<Offset> neighbor_offsets(const LBPConfig& cfg) {
  cfg.validate();
  auto snap = [](double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
  };
  std::vector<Offset> off(cfg.points);
  for (int p = 0; p < cfg.points; ++p) {
    const double theta = 2.0 * std::numbers::pi * p / cfg.points;
    off[p] = {snap(-cfg.radius * std::sin(theta)), snap(cfg.radius * std::cos(theta))};
  }
  return off;
}

/// Grey level at a (possibly fractional) position inside the image.
template <typename T>
T sample(const Tensor<T>& gray, double y, double x, Interpolation interp) {
  const std::size_t W = gray.dim(1);
  if (interp == Interpolation::nearest) {
    const auto yi = static_cast<std::size_t>(std::lround(y));
    const auto xi = static_cast<std::size_t>(std::lround(x));
    return gray[yi * W + xi];
  }
  const double y0 = std::floor(y), x0 = std::floor(x);
  const double fy = y - y0, fx = x - x0;
  const auto yi = static_cast<std::size_t>(y0), xi = static_cast<std::size_t>(x0);
  const std::size_t yj = fy > 0 ? yi + 1 : yi, xj = fx > 0 ? xi + 1 : xi;
  const double a = gray[yi * W + xi], b = gray[yi * W + xj];
  const double c = gray[yj * W + xi], d = gray[yj * W + xj];
  const double top = a + fx * (b - a);
  const double bottom = c + fx * (d - c);
  return static_cast<T>(top + fy * (bottom - top));
}

/// Gathers the P neighbor values of interior pixel (r, c).
template <typename T>
void gather_neighbors(const Tensor<T>& gray, std::size_t r, std::size_t c,
                      const std::vector<Offset>& offsets, Interpolation interp,
                      std::vector<T>& out) {
  out.resize(offsets.size());
  for (std::size_t p = 0; p < offsets.size(); ++p)
    out[p] = sample(gray, static_cast<double>(r) + offsets[p].dy,
                    static_cast<double>(c) + offsets[p].dx, interp);
}

/// Code map of a [H,W] grayscale image; border pixels within ceil(R) hold 0.
template <typename T>
Tensor<std::uint32_t> lbp_map(const Tensor<T>& gray, const LBPConfig& cfg = {}) {
  require_rank(gray, 2, "lbp_map");
  const auto offsets = neighbor_offsets(cfg);
  const std::size_t H = gray.dim(0), W = gray.dim(1), m = cfg.margin();
  if (H <= 2 * m || W <= 2 * m)
    throw ShapeError("image " + shape_str(gray.shape()) + " too small for LBP radius " +
                     std::to_string(cfg.radius));
  Tensor<std::uint32_t> codes({H, W});
  std::vector<T> nb;
  for (std::size_t r = m; r < H - m; ++r)
    for (std::size_t c = m; c < W - m; ++c) {
      gather_neighbors(gray, r, c, offsets, cfg.interpolation, nb);
      codes[r * W + c] = lbp_code<T>(gray[r * W + c], nb, cfg.points);
    }
  return codes;
}

/// Histogram of interior codes. Border-fill pixels are excluded by position.
inline LBPFeatures lbp_histogram(const Tensor<std::uint32_t>& codes, const LBPConfig& cfg = {},
                                 bool normalize = true) {
  require_rank(codes, 2, "lbp_histogram");
  cfg.validate();
  const std::size_t H = codes.dim(0), W = codes.dim(1), m = cfg.margin();
  if (H <= 2 * m || W <= 2 * m)
    throw ShapeError("code map " + shape_str(codes.shape()) + " has no interior pixels");
  LBPFeatures f{std::vector<double>(cfg.bins(), 0.0), cfg, normalize};
  for (std::size_t r = m; r < H - m; ++r)
    for (std::size_t c = m; c < W - m; ++c) {
      const std::uint32_t code = codes[r * W + c];
      if (code >= cfg.bins())
        throw std::out_of_range("LBP code " + std::to_string(code) + " out of range for P=" +
                                std::to_string(cfg.points));
      f.histogram[code] += 1.0;
    }
  if (normalize) {
    const double total = static_cast<double>((H - 2 * m) * (W - 2 * m));
    for (auto& v : f.histogram) v /= total;
  }
  return f;
}

template <typename T>
LBPFeatures extract_features(const Tensor<T>& gray, const LBPConfig& cfg = {}) {
  return lbp_histogram(lbp_map(gray, cfg), cfg, true);
}

}  // namespace futi::lbp
