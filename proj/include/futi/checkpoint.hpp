#pragma once

// Binary checkpoint layout (all integers and reals little-endian):
//
//   "FUTI"            4 magic bytes
//   u32 version       currently 1
//   u32 model kind    1 dnn, 2 cnn, 3 fusionnet
//   u64 C, H, W       image input shape
//   u64 texture_dim
//   u64 num_classes
//   u32 layer count
//   per layer:
//     u32 kind tag    nn::LayerKind
//     u32 branch      0 image, 1 texture, 2 head
//     u32 n_hyper, then n_hyper f64
//     u32 n_params, then per parameter: u32 rank, rank x u64 extents, f64 data
//
// fusionnet writes a concat entry (branch 2, hyper = {image width, texture
// width}, no parameters) between the texture branch and the head.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "futi/models.hpp"

namespace futi::checkpoint {

inline constexpr std::array<char, 4> kMagic{'F', 'U', 'T', 'I'};
inline constexpr std::uint32_t kVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  static_assert(sizeof(U) == 4 || sizeof(U) == 8);
  using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
  const Bits b = std::bit_cast<Bits>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(b >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

  template <typename U>
  U get() {
    using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
    if (pos_ + sizeof(U) > buf_.size()) throw FormatError("checkpoint truncated");
    Bits b = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) b |= Bits{buf_[pos_ + i]} << (8 * i);
    pos_ += sizeof(U);
    return std::bit_cast<U>(b);
  }
  std::array<char, 4> magic() {
    if (buf_.size() < 4) throw FormatError("checkpoint truncated");
    std::array<char, 4> m;
    std::memcpy(m.data(), buf_.data(), 4);
    pos_ = 4;
    return m;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_layer(std::vector<std::uint8_t>& out, const nn::Layer<T>& layer, std::uint32_t branch) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.kind()));
  put<std::uint32_t>(out, branch);
  const auto hp = layer.hyperparameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(hp.size()));
  for (double h : hp) put<double>(out, h);
  const auto params = layer.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->rank()));
    for (auto e : p->shape()) put<std::uint64_t>(out, e);
    for (const T& v : p->values()) put<double>(out, static_cast<double>(v));
  }
}

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> serialize(const models::Model<T>& model) {
  using detail::put;
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  const auto& cfg = model.config();
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.kind));
  for (auto e : cfg.input_shape) put<std::uint64_t>(out, e);
  put<std::uint64_t>(out, cfg.texture_dim);
  put<std::uint64_t>(out, cfg.num_classes);

  const auto& img = model.image_branch();
  const auto& tex = model.texture_branch();
  const auto& head = model.head();
  const std::size_t count = img.size() + tex.size() + head.size() + (model.fused() ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(count));
  for (std::size_t i = 0; i < img.size(); ++i) detail::put_layer(out, img[i], 0);
  for (std::size_t i = 0; i < tex.size(); ++i) detail::put_layer(out, tex[i], 1);
  if (model.fused()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nn::LayerKind::concat));
    put<std::uint32_t>(out, 2);
    put<std::uint32_t>(out, 2);
    put<double>(out, static_cast<double>(model.image_feature_width()));
    put<double>(out, static_cast<double>(model.texture_feature_width()));
    put<std::uint32_t>(out, 0);
  }
  for (std::size_t i = 0; i < head.size(); ++i) detail::put_layer(out, head[i], 2);
  return out;
}

template <typename T = double>
models::Model<T> deserialize(const std::vector<std::uint8_t>& buf) {
  detail::Reader in(buf);
  if (in.magic() != kMagic) throw FormatError("not a checkpoint: bad magic bytes");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  models::ModelConfig cfg;
  const auto kind = in.get<std::uint32_t>();
  if (kind < 1 || kind > 3) throw FormatError("unknown model kind tag " + std::to_string(kind));
  cfg.kind = static_cast<models::ModelKind>(kind);
  cfg.input_shape.clear();
  for (int i = 0; i < 3; ++i) cfg.input_shape.push_back(in.get<std::uint64_t>());
  cfg.texture_dim = in.get<std::uint64_t>();
  cfg.num_classes = in.get<std::uint64_t>();

  nn::Sequential<T> branches[3];
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto tag = static_cast<nn::LayerKind>(in.get<std::uint32_t>());
    const auto branch = in.get<std::uint32_t>();
    if (branch > 2) throw FormatError("bad branch id " + std::to_string(branch));
    const auto nh = in.get<std::uint32_t>();
    if (nh > 64) throw FormatError("implausible hyperparameter count");
    std::vector<double> hp(nh);
    for (auto& h : hp) h = in.get<double>();
    const auto np = in.get<std::uint32_t>();
    if (tag == nn::LayerKind::concat) {
      if (np != 0) throw FormatError("concat entry carries parameters");
      continue;
    }
    std::unique_ptr<nn::Layer<T>> layer;
    try {
      layer = nn::make_layer<T>(tag, hp);
    } catch (const std::exception& e) {
      throw FormatError(std::string("bad layer entry: ") + e.what());
    }
    auto params = layer->parameters();
    if (params.size() != np)
      throw FormatError(std::string(nn::kind_name(tag)) + " layer expects " +
                        std::to_string(params.size()) + " parameter tensors, checkpoint has " +
                        std::to_string(np));
    for (auto* p : params) {
      const auto rank = in.get<std::uint32_t>();
      Shape shape(rank);
      for (auto& e : shape) e = in.get<std::uint64_t>();
      if (shape != p->shape())
        throw FormatError("parameter shape " + shape_str(shape) + " does not match layer " +
                          shape_str(p->shape()));
      for (auto& v : p->values()) v = static_cast<T>(in.get<double>());
    }
    branches[branch].add(std::move(layer));
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint payload");
  for (std::size_t i = 0; i < branches[2].size(); ++i)
    if (branches[2][i].kind() == nn::LayerKind::dropout)
      cfg.dropout = branches[2][i].hyperparameters()[0];
  try {
    models::Model<T> m(cfg, std::move(branches[0]), std::move(branches[1]), std::move(branches[2]));
    m.set_dropout_rng(Rng(0, Stream::dropout));
    return m;
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("inconsistent checkpoint graph: ") + e.what());
  }
}

template <typename T>
void save(const models::Model<T>& model, const std::string& path) {
  const auto bytes = serialize(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path);
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

template <typename T = double>
models::Model<T> load(const std::string& path) {
  try {
    return deserialize<T>(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace futi::checkpoint
