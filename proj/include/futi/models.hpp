#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "futi/nn.hpp"
#include "futi/random.hpp"
#include "futi/tensor.hpp"

namespace futi::models {

using nn::Mode;

enum class ModelKind : std::uint32_t { dnn = 1, cnn = 2, fusionnet = 3 };
enum class PoolKind { max, avg };

inline const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::dnn: return "dnn";
    case ModelKind::cnn: return "cnn";
    case ModelKind::fusionnet: return "fusionnet";
  }
  return "unknown";
}

inline ModelKind parse_kind(const std::string& s) {
  if (s == "dnn") return ModelKind::dnn;
  if (s == "cnn") return ModelKind::cnn;
  if (s == "fusionnet") return ModelKind::fusionnet;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected dnn, cnn or fusionnet)");
}

struct ModelConfig {
  ModelKind kind = ModelKind::fusionnet;
  Shape input_shape{1, 64, 64};  // C,H,W
  std::size_t texture_dim = 256;
  std::size_t num_classes = 4;

  // dnn
  std::size_t dnn_hidden1 = 512;
  std::size_t dnn_hidden2 = 256;
  // cnn trunk, shared layout with the fusionnet image branch
  std::size_t conv1_filters = 16;
  std::size_t conv2_filters = 32;
  std::size_t kernel = 3;
  std::size_t pool = 2;
  PoolKind pooling = PoolKind::max;
  std::size_t cnn_hidden = 128;
  // fusionnet texture branch and head
  std::size_t texture_hidden1 = 128;
  std::size_t texture_hidden2 = 64;
  std::size_t fusion_hidden = 64;

  double dropout = 0.5;

  void validate() const {
    if (num_classes < 2) throw std::invalid_argument("num_classes must be at least 2");
    if (input_shape.size() != 3 || shape_numel(input_shape) == 0)
      throw std::invalid_argument("input_shape must be (C,H,W) with positive extents");
    for (auto e : input_shape)
      if (!e) throw std::invalid_argument("input_shape extents must be positive");
    if (kind == ModelKind::fusionnet && texture_dim == 0)
      throw std::invalid_argument("fusionnet requires texture_dim > 0");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw std::invalid_argument("dropout rate must lie in [0, 1)");
    for (auto w : {dnn_hidden1, dnn_hidden2, conv1_filters, conv2_filters, kernel, pool,
                   cnn_hidden, texture_hidden1, texture_hidden2, fusion_hidden})
      if (!w) throw std::invalid_argument("layer widths must be positive");
  }
};

/// Samples stacked for batched evaluation. textures is empty for image-only sets.
template <typename T>
struct LabeledSet {
  Tensor<T> images;    // [N,C,H,W]
  Tensor<T> textures;  // [N,D] or empty
  std::vector<std::size_t> labels;
  /// Stable per-sample keys; training order is derived from these, not storage order.
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return labels.size(); }
  bool has_textures() const { return !textures.empty(); }

  LabeledSet subset(std::span<const std::size_t> idx) const {
    LabeledSet out;
    if (idx.empty()) return out;
    const Shape ps(images.shape().begin() + 1, images.shape().end());
    const std::size_t isz = shape_numel(ps);
    Shape ishape{idx.size()};
    ishape.insert(ishape.end(), ps.begin(), ps.end());
    std::vector<T> ibuf(idx.size() * isz);
    std::vector<T> tbuf;
    const std::size_t D = has_textures() ? textures.dim(1) : 0;
    if (D) tbuf.resize(idx.size() * D);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const std::size_t i = idx[k];
      if (i >= size()) throw std::out_of_range("sample index out of range");
      std::copy_n(images.data() + i * isz, isz, ibuf.data() + k * isz);
      if (D) std::copy_n(textures.data() + i * D, D, tbuf.data() + k * D);
      out.labels.push_back(labels[i]);
      out.ids.push_back(ids.empty() ? i : ids[i]);
    }
    out.images = Tensor<T>(ishape, std::move(ibuf));
    if (D) out.textures = Tensor<T>({idx.size(), D}, std::move(tbuf));
    return out;
  }
};

template <typename T>
struct InputGrads {
  Tensor<T> images;
  Tensor<T> textures;
};

/// Layer graph: image branch, optional texture branch, concat, head, softmax.
/// dnn and cnn leave the texture branch empty.
template <typename T>
class Model {
 public:
  Model() = default;
  Model(ModelConfig cfg, nn::Sequential<T> image, nn::Sequential<T> texture, nn::Sequential<T> head)
      : config_(std::move(cfg)),
        image_(std::move(image)),
        texture_(std::move(texture)),
        head_(std::move(head)) {
    check_graph();
  }

  const ModelConfig& config() const { return config_; }
  ModelKind kind() const { return config_.kind; }
  bool fused() const { return config_.kind == ModelKind::fusionnet; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  /// When set, the texture branch sees zeros whatever features are supplied.
  bool texture_ablated() const { return texture_ablated_; }
  void set_texture_ablated(bool on) { texture_ablated_ = on; }

  Rng& dropout_rng() { return dropout_rng_; }
  void set_dropout_rng(const Rng& r) { dropout_rng_ = r; }

  nn::Sequential<T>& image_branch() { return image_; }
  nn::Sequential<T>& texture_branch() { return texture_; }
  nn::Sequential<T>& head() { return head_; }
  const nn::Sequential<T>& image_branch() const { return image_; }
  const nn::Sequential<T>& texture_branch() const { return texture_; }
  const nn::Sequential<T>& head() const { return head_; }

  std::size_t image_feature_width() const { return image_width_; }
  std::size_t texture_feature_width() const { return texture_width_; }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> ps, gs;
    collect(ps, gs);
    return ps;
  }
  std::vector<const Tensor<T>*> parameters() const {
    auto ps = const_cast<Model*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  /// Pre-softmax class scores [N, num_classes].
  Tensor<T> logits(const Tensor<T>& images, const Tensor<T>* textures) {
    check_inputs(images, textures);
    Tensor<T> feat = image_.forward(images, mode_, dropout_rng_);
    if (fused()) {
      Tensor<T> tfeat = texture_ablated_
                            ? texture_.forward(Tensor<T>(textures->shape()), mode_, dropout_rng_)
                            : texture_.forward(*textures, mode_, dropout_rng_);
      feat = nn::concat_features(feat, tfeat);
    }
    return head_.forward(std::move(feat), mode_, dropout_rng_);
  }

  Tensor<T> forward(const Tensor<T>& images, const Tensor<T>* textures = nullptr) {
    return softmax(logits(images, textures));
  }

  /// Propagates d(loss)/d(logits) of the last forward call; accumulates
  /// parameter gradients and returns input gradients.
  InputGrads<T> backward_logits(const Tensor<T>& grad_logits) {
    Tensor<T> g = head_.backward(grad_logits);
    InputGrads<T> out;
    if (fused()) {
      auto [gi, gt] = nn::split_features(g, image_width_);
      out.textures = texture_.backward(std::move(gt));
      g = std::move(gi);
    }
    out.images = image_.backward(std::move(g));
    return out;
  }

  void zero_grad() {
    image_.zero_grad();
    texture_.zero_grad();
    head_.zero_grad();
  }

  nn::GradientSet<T> gradients() {
    std::vector<Tensor<T>*> ps, gs;
    collect(ps, gs);
    nn::GradientSet<T> out;
    out.reserve(gs.size());
    for (auto* g : gs) out.push_back(*g);
    return out;
  }

 private:
  void collect(std::vector<Tensor<T>*>& ps, std::vector<Tensor<T>*>& gs) {
    image_.collect(ps, gs);
    texture_.collect(ps, gs);
    head_.collect(ps, gs);
  }

  void check_graph() {
    config_.validate();
    const Shape img = image_.output_shape(config_.input_shape);
    if (img.size() != 1) throw ShapeError("image branch must end in a flat feature vector");
    image_width_ = img[0];
    std::size_t head_in = image_width_;
    if (fused()) {
      const Shape tex = texture_.output_shape({config_.texture_dim});
      if (tex.size() != 1) throw ShapeError("texture branch must end in a flat feature vector");
      texture_width_ = tex[0];
      head_in += texture_width_;
    } else if (!texture_.empty()) {
      throw std::invalid_argument(std::string(kind_name(config_.kind)) +
                                  " model cannot carry a texture branch");
    }
    const Shape out = head_.output_shape({head_in});
    if (out != Shape{config_.num_classes})
      throw ShapeError("model head produces " + shape_str(out) + ", expected [" +
                       std::to_string(config_.num_classes) + "]");
  }

  void check_inputs(const Tensor<T>& images, const Tensor<T>* textures) const {
    require_rank(images, 4, "model input");
    const Shape ps(images.shape().begin() + 1, images.shape().end());
    if (ps != config_.input_shape)
      throw ShapeError("model expects images shaped [N]" + shape_str(config_.input_shape) +
                       ", got " + shape_str(images.shape()));
    const bool has_tex = textures && !textures->empty();
    if (fused() && !has_tex)
      throw std::invalid_argument("fusionnet forward requires texture features");
    if (!fused() && has_tex)
      throw std::invalid_argument(std::string(kind_name(config_.kind)) +
                                  " forward does not accept texture features");
    if (has_tex && textures->shape() != Shape{images.dim(0), config_.texture_dim})
      throw ShapeError("texture features " + shape_str(textures->shape()) + " do not match [" +
                       std::to_string(images.dim(0)) + "," + std::to_string(config_.texture_dim) +
                       "]");
  }

  ModelConfig config_;
  nn::Sequential<T> image_, texture_, head_;
  Mode mode_ = Mode::eval;
  bool texture_ablated_ = false;
  Rng dropout_rng_;
  std::size_t image_width_ = 0;
  std::size_t texture_width_ = 0;
};

// ---------------------------------------------------------------------------
// Builders

namespace detail {

template <typename T>
nn::Dense<T> dense(std::size_t in, std::size_t out, Rng& rng) {
  nn::Dense<T> d(in, out);
  d.init(rng);
  return d;
}

/// conv/relu/pool x2, flatten, dense(hidden), relu.
template <typename T>
nn::Sequential<T> cnn_trunk(const ModelConfig& c, Rng& rng) {
  const std::size_t C = c.input_shape[0], H = c.input_shape[1], W = c.input_shape[2];
  const std::size_t pad = c.kernel / 2;
  nn::Sequential<T> s;
  Shape shape{C, H, W};
  auto add_pool = [&] {
    if (shape[1] < c.pool || shape[2] < c.pool)
      throw ShapeError("input " + shape_str(c.input_shape) +
                       " too small for two pooling stages of window " + std::to_string(c.pool));
    if (c.pooling == PoolKind::max)
      s.add(nn::MaxPool2D<T>(c.pool, c.pool));
    else
      s.add(nn::AvgPool2D<T>(c.pool, c.pool));
    shape = s[s.size() - 1].output_shape(shape);
  };
  auto add_conv = [&](std::size_t in, std::size_t out) {
    nn::Conv2D<T> conv(Conv2DSpec{in, out, c.kernel, c.kernel, 1, pad});
    conv.init(rng);
    shape = conv.output_shape(shape);
    s.add(std::move(conv));
    s.add(nn::ReLU<T>());
  };
  add_conv(C, c.conv1_filters);
  add_pool();
  add_conv(c.conv1_filters, c.conv2_filters);
  add_pool();
  s.add(nn::Flatten<T>());
  s.add(dense<T>(shape_numel(shape), c.cnn_hidden, rng));
  s.add(nn::ReLU<T>());
  return s;
}

template <typename T>
Model<T> finish(const ModelConfig& cfg, nn::Sequential<T> image, nn::Sequential<T> texture,
                nn::Sequential<T> head, std::uint64_t seed) {
  Model<T> m(cfg, std::move(image), std::move(texture), std::move(head));
  m.set_dropout_rng(Rng(seed, Stream::dropout));
  return m;
}

inline void require_kind(const ModelConfig& cfg, ModelKind want) {
  if (cfg.kind != want)
    throw std::invalid_argument(std::string("builder for ") + kind_name(want) +
                                " called with config of kind " + kind_name(cfg.kind));
}

}  // namespace detail

/// flatten -> dense(h1) -> relu -> dense(h2) -> relu -> dense(K)
template <typename T = double>
Model<T> build_dnn(const ModelConfig& cfg, std::uint64_t seed) {
  detail::require_kind(cfg, ModelKind::dnn);
  cfg.validate();
  Rng rng(seed, Stream::init);
  nn::Sequential<T> image, head;
  image.add(nn::Flatten<T>());
  image.add(detail::dense<T>(shape_numel(cfg.input_shape), cfg.dnn_hidden1, rng));
  image.add(nn::ReLU<T>());
  image.add(detail::dense<T>(cfg.dnn_hidden1, cfg.dnn_hidden2, rng));
  image.add(nn::ReLU<T>());
  head.add(detail::dense<T>(cfg.dnn_hidden2, cfg.num_classes, rng));
  return detail::finish<T>(cfg, std::move(image), {}, std::move(head), seed);
}

/// CNN trunk -> dropout -> dense(K)
template <typename T = double>
Model<T> build_cnn(const ModelConfig& cfg, std::uint64_t seed) {
  detail::require_kind(cfg, ModelKind::cnn);
  cfg.validate();
  Rng rng(seed, Stream::init);
  nn::Sequential<T> image = detail::cnn_trunk<T>(cfg, rng);
  nn::Sequential<T> head;
  head.add(nn::Dropout<T>(cfg.dropout));
  head.add(detail::dense<T>(cfg.cnn_hidden, cfg.num_classes, rng));
  return detail::finish<T>(cfg, std::move(image), {}, std::move(head), seed);
}

/// Image branch (CNN trunk) and texture branch (two dense+relu stages),
/// concatenated into dense -> relu -> dropout -> dense(K).
template <typename T = double>
Model<T> build_fusionnet(const ModelConfig& cfg, std::uint64_t seed) {
  detail::require_kind(cfg, ModelKind::fusionnet);
  cfg.validate();
  Rng rng(seed, Stream::init);
  nn::Sequential<T> image = detail::cnn_trunk<T>(cfg, rng);
  nn::Sequential<T> texture;
  texture.add(detail::dense<T>(cfg.texture_dim, cfg.texture_hidden1, rng));
  texture.add(nn::ReLU<T>());
  texture.add(detail::dense<T>(cfg.texture_hidden1, cfg.texture_hidden2, rng));
  texture.add(nn::ReLU<T>());
  nn::Sequential<T> head;
  head.add(detail::dense<T>(cfg.cnn_hidden + cfg.texture_hidden2, cfg.fusion_hidden, rng));
  head.add(nn::ReLU<T>());
  head.add(nn::Dropout<T>(cfg.dropout));
  head.add(detail::dense<T>(cfg.fusion_hidden, cfg.num_classes, rng));
  return detail::finish<T>(cfg, std::move(image), std::move(texture), std::move(head), seed);
}

template <typename T = double>
Model<T> build(const ModelConfig& cfg, std::uint64_t seed) {
  switch (cfg.kind) {
    case ModelKind::dnn: return build_dnn<T>(cfg, seed);
    case ModelKind::cnn: return build_cnn<T>(cfg, seed);
    case ModelKind::fusionnet: return build_fusionnet<T>(cfg, seed);
  }
  throw std::invalid_argument("unknown model kind");
}

// ---------------------------------------------------------------------------
// Gradients and optimization

template <typename T>
struct LossAndGrads {
  T loss;
  nn::GradientSet<T> grads;
};

/// Mean cross-entropy of the batch and its exact parameter gradients.
template <typename T>
LossAndGrads<T> backward(Model<T>& model, const LabeledSet<T>& batch) {
  if (batch.size() == 0) throw std::invalid_argument("backward on an empty batch");
  if (batch.images.dim(0) != batch.size())
    throw ShapeError("batch has " + std::to_string(batch.images.dim(0)) + " images but " +
                     std::to_string(batch.size()) + " labels");
  model.zero_grad();
  const Tensor<T> probs =
      model.forward(batch.images, batch.has_textures() ? &batch.textures : nullptr);
  const T loss = nn::cross_entropy(probs, std::span<const std::size_t>(batch.labels));
  model.backward_logits(nn::softmax_cross_entropy_grad(probs, std::span(batch.labels)));
  return {loss, model.gradients()};
}

/// theta <- theta - lr * grad. No momentum, no weight decay.
template <typename T>
void sgd_step(Model<T>& model, const nn::GradientSet<T>& grads, double learning_rate) {
  auto params = model.parameters();
  if (params.size() != grads.size())
    throw ShapeError("gradient set has " + std::to_string(grads.size()) + " tensors, model has " +
                     std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->shape() != grads[i].shape())
      throw ShapeError("gradient " + std::to_string(i) + " shaped " + shape_str(grads[i].shape()) +
                       " does not match parameter " + shape_str(params[i]->shape()));
  const T lr = static_cast<T>(learning_rate);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->data();
    const T* g = grads[i].data();
    for (std::size_t k = 0; k < params[i]->size(); ++k) p[k] -= lr * g[k];
  }
}

template <typename T>
void sgd_step(Model<T>& model, const nn::GradientSet<T>& grads, const nn::SGDConfig& cfg) {
  sgd_step(model, grads, cfg.learning_rate);
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double test_acc = std::numeric_limits<double>::quiet_NaN();

  bool operator==(const EpochStats& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return epoch == o.epoch && same(train_loss, o.train_loss) && same(train_acc, o.train_acc) &&
           same(test_loss, o.test_loss) && same(test_acc, o.test_acc);
  }
};

using History = std::vector<EpochStats>;

template <typename T>
struct TrainHooks {
  const LabeledSet<T>* test_set = nullptr;
  std::function<void(const EpochStats&)> on_epoch;
};

struct Scores {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Eval-mode probabilities for a whole set, processed in chunks.
template <typename T>
Tensor<T> predict_proba(Model<T>& model, const LabeledSet<T>& set, std::size_t chunk = 64) {
  if (set.size() == 0) throw std::invalid_argument("cannot predict on an empty set");
  const Mode saved = model.mode();
  model.set_mode(Mode::eval);
  const std::size_t K = model.config().num_classes;
  std::vector<T> out;
  out.reserve(set.size() * K);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += chunk) {
    idx.resize(std::min(chunk, set.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto part = set.subset(idx);
    const auto p = model.forward(part.images, part.has_textures() ? &part.textures : nullptr);
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  model.set_mode(saved);
  return Tensor<T>({set.size(), K}, std::move(out));
}

template <typename T>
Scores score(Model<T>& model, const LabeledSet<T>& set) {
  const Tensor<T> probs = predict_proba(model, set);
  const auto pred = argmax_rows(probs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == set.labels[i];
  return {static_cast<double>(nn::cross_entropy(probs, std::span(set.labels))),
          static_cast<double>(hits) / static_cast<double>(set.size())};
}

/// Visiting order for one epoch: indices sorted by sample id, then shuffled.
/// Depends only on the ids and the rng state, never on storage order.
inline std::vector<std::size_t> epoch_order(std::span<const std::uint64_t> ids, Rng& rng) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  shuffle(order, rng);
  return order;
}

/// Mini-batch SGD for cfg.epochs epochs; the trailing partial batch is kept.
/// Per-epoch stats come from an eval-mode pass after the epoch's updates.
template <typename T>
History train(Model<T>& model, const LabeledSet<T>& train_set, const nn::SGDConfig& cfg,
              const TrainHooks<T>& hooks = {}) {
  if (train_set.size() == 0) throw std::invalid_argument("training set is empty");
  cfg.validate();
  std::vector<std::uint64_t> ids = train_set.ids;
  if (ids.empty()) {
    ids.resize(train_set.size());
    std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  }
  if (ids.size() != train_set.size())
    throw std::invalid_argument("training set ids do not match sample count");

  Rng shuffle_rng(cfg.seed, Stream::shuffle);
  History history;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = epoch_order(ids, shuffle_rng);
    model.set_mode(Mode::train);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const auto batch = train_set.subset(std::span(order).subspan(start, n));
      const auto lg = backward(model, batch);
      sgd_step(model, lg.grads, cfg.learning_rate);
    }
    model.set_mode(Mode::eval);

    EpochStats st;
    st.epoch = epoch;
    const Scores tr = score(model, train_set);
    st.train_loss = tr.loss;
    st.train_acc = tr.accuracy;
    if (hooks.test_set && hooks.test_set->size()) {
      const Scores te = score(model, *hooks.test_set);
      st.test_loss = te.loss;
      st.test_acc = te.accuracy;
    }
    history.push_back(st);
    if (hooks.on_epoch) hooks.on_epoch(st);
  }
  model.set_mode(Mode::eval);
  return history;
}

}  // namespace futi::models
