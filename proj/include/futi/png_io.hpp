#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "futi/tensor.hpp"

namespace futi::png {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit interleaved pixels.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

inline std::size_t channels_of(png_uint_32 format) {
  std::size_t c = (format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  if (format & PNG_FORMAT_FLAG_ALPHA) ++c;
  return c;
}

/// Decodes keeping the file's own channel layout (gray, gray+alpha, RGB, RGBA).
inline Image read(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw PngError(path + ": " + img.message);
  if (img.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&img);
    throw PngError(path + ": 16-bit PNGs are not supported");
  }
  Image out;
  out.channels = channels_of(img.format);
  img.format &= ~PNG_FORMAT_FLAG_COLORMAP;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw PngError(path + ": " + msg);
  }
  return out;
}

inline void write(const std::string& path, const Image& im) {
  if (im.channels < 1 || im.channels > 4) throw PngError("unsupported channel count");
  if (im.pixels.size() != im.width * im.height * im.channels)
    throw PngError("pixel buffer does not match image extents");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(im.width);
  img.height = static_cast<png_uint_32>(im.height);
  static constexpr png_uint_32 formats[] = {PNG_FORMAT_GRAY, PNG_FORMAT_GA, PNG_FORMAT_RGB,
                                            PNG_FORMAT_RGBA};
  img.format = formats[im.channels - 1];
  if (!png_image_write_to_file(&img, path.c_str(), 0, im.pixels.data(), 0, nullptr))
    throw PngError(path + ": " + img.message);
}

/// Interleaved RGB to a planar [3,H,W] tensor of values in [0,255].
template <typename T = double>
Tensor<T> to_planar(const Image& im) {
  if (im.channels != 3)
    throw ShapeError("expected a 3-channel RGB image, got " + std::to_string(im.channels) +
                     " channels");
  if (!im.width || !im.height) throw ShapeError("image has zero extent");
  const std::size_t plane = im.width * im.height;
  Tensor<T> t({3, im.height, im.width});
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) t[c * plane + i] = static_cast<T>(im.pixels[i * 3 + c]);
  return t;
}

/// Single-plane 8-bit image from a [H,W] tensor, values rounded and clamped.
template <typename T>
Image from_gray(const Tensor<T>& g, std::size_t channels = 1) {
  require_rank(g, 2, "from_gray");
  Image im{g.dim(1), g.dim(0), channels, {}};
  im.pixels.resize(g.size() * channels);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double v = static_cast<double>(g[i]);
    v = v < 0 ? 0 : (v > 255 ? 255 : v);
    const auto b = static_cast<std::uint8_t>(v + 0.5);
    for (std::size_t c = 0; c < channels; ++c) im.pixels[i * channels + c] = b;
  }
  return im;
}

}  // namespace futi::png
