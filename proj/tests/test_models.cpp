#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "futi/models.hpp"
#include "oracles.hpp"

using namespace futi;
using namespace futi::models;
using futi::test::random_tensor;

namespace {

ModelConfig toy(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.input_shape = {1, 8, 8};
  c.texture_dim = 16;
  c.dnn_hidden1 = 12;
  c.dnn_hidden2 = 7;
  c.conv1_filters = 2;
  c.conv2_filters = 3;
  c.cnn_hidden = 6;
  c.texture_hidden1 = 5;
  c.texture_hidden2 = 4;
  c.fusion_hidden = 5;
  return c;
}

LabeledSet<double> random_set(const ModelConfig& c, std::size_t n, Rng& rng) {
  LabeledSet<double> s;
  s.images = random_tensor({n, c.input_shape[0], c.input_shape[1], c.input_shape[2]}, rng, 0, 1);
  if (c.kind == ModelKind::fusionnet) s.textures = random_tensor({n, c.texture_dim}, rng, 0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    s.labels.push_back(rng.below(c.num_classes));
    s.ids.push_back(1000 + 37 * i);
  }
  return s;
}

const Tensor<double>* tex(const LabeledSet<double>& s) {
  return s.has_textures() ? &s.textures : nullptr;
}

std::vector<std::vector<double>> snapshot(Model<double>& m) {
  std::vector<std::vector<double>> out;
  for (auto* p : m.parameters()) out.push_back(p->values());
  return out;
}

}  // namespace

TEST(BuildDnn, DefaultParameterCountMatchesClosedForm) {
  ModelConfig c;
  c.kind = ModelKind::dnn;
  auto m = build_dnn(c, 0);
  const std::size_t expected = 64 * 64 * 512 + 512 + 512 * 256 + 256 + 256 * 4 + 4;
  EXPECT_EQ(expected, 2230020u);
  EXPECT_EQ(m.parameter_count(), expected);
}

TEST(BuildDnn, ShapeAndDeterminism) {
  auto c = toy(ModelKind::dnn);
  auto a = build_dnn(c, 7), b = build_dnn(c, 7), other = build_dnn(c, 8);
  EXPECT_EQ(snapshot(a), snapshot(b));
  EXPECT_NE(snapshot(a), snapshot(other));
  Rng rng(1);
  auto s = random_set(c, 5, rng);
  EXPECT_EQ(a.forward(s.images).shape(), (Shape{5, 4}));
  EXPECT_THROW(build_cnn(c, 0), std::invalid_argument);
}

TEST(BuildCnn, DefaultFlattenWidth) {
  ModelConfig c;
  c.kind = ModelKind::cnn;
  auto m = build_cnn(c, 0);
  Shape s = c.input_shape;
  auto& trunk = m.image_branch();
  for (std::size_t i = 0; i < trunk.size(); ++i) {
    s = trunk[i].output_shape(s);
    if (trunk[i].kind() == nn::LayerKind::flatten) break;
  }
  EXPECT_EQ(s, (Shape{32 * 16 * 16}));
  EXPECT_EQ(s[0], 8192u);
}

TEST(BuildCnn, ZeroInputGivesUniformProbabilities) {
  ModelConfig c;
  c.kind = ModelKind::cnn;
  c.input_shape = {1, 16, 16};
  auto m = build_cnn(c, 3);
  auto p = m.forward(Tensor<double>({2, 1, 16, 16}));
  ASSERT_EQ(p.shape(), (Shape{2, 4}));
  for (double v : p.values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(BuildCnn, RejectsInputTooSmallForTwoPools) {
  auto c = toy(ModelKind::cnn);
  c.input_shape = {1, 3, 3};
  EXPECT_THROW(build_cnn(c, 0), ShapeError);
}

TEST(BuildFusion, ConcatWidthAndShapes) {
  ModelConfig c;
  c.kind = ModelKind::fusionnet;
  c.input_shape = {1, 16, 16};
  auto m = build_fusionnet(c, 0);
  EXPECT_EQ(m.image_feature_width(), 128u);
  EXPECT_EQ(m.texture_feature_width(), 64u);
  EXPECT_EQ(m.image_feature_width() + m.texture_feature_width(), 192u);
  EXPECT_EQ(m.head()[0].hyperparameters()[0], 192.0);

  auto bad = c;
  bad.texture_dim = 0;
  EXPECT_THROW(build_fusionnet(bad, 0), std::invalid_argument);
}

TEST(BuildFusion, CutTextureBranchGivesZeroTextureGradient) {
  auto c = toy(ModelKind::fusionnet);
  auto m = build_fusionnet(c, 4);
  auto& last = m.texture_branch()[2];
  for (auto* p : last.parameters()) p->fill(0.0);
  Rng rng(2);
  auto s = random_set(c, 3, rng);
  auto p1 = m.forward(s.images, &s.textures);
  auto g = m.backward_logits(random_tensor({3, 4}, rng));
  for (double v : g.textures.values()) EXPECT_EQ(v, 0.0);
  auto other = random_tensor({3, 16}, rng, 0, 1);
  EXPECT_EQ(m.forward(s.images, &other).values(), p1.values());
}

TEST(Forward, TextureContract) {
  Rng rng(3);
  auto f = build_fusionnet(toy(ModelKind::fusionnet), 0);
  auto d = build_dnn(toy(ModelKind::dnn), 0);
  auto s = random_set(toy(ModelKind::fusionnet), 2, rng);
  EXPECT_THROW(f.forward(s.images), std::invalid_argument);
  EXPECT_THROW(d.forward(s.images, &s.textures), std::invalid_argument);
  Tensor<double> wrong({2, 15});
  EXPECT_THROW(f.forward(s.images, &wrong), ShapeError);
  EXPECT_THROW(d.forward(Tensor<double>({2, 1, 9, 8})), ShapeError);
  EXPECT_THROW(d.forward(Tensor<double>({2, 64})), ShapeError);
}

TEST(Forward, RowsAreDistributionsAndEvalIsDeterministic) {
  Rng rng(4);
  for (auto kind : {ModelKind::dnn, ModelKind::cnn, ModelKind::fusionnet}) {
    auto c = toy(kind);
    auto m = build(c, 5);
    auto s = random_set(c, 6, rng);
    auto p = m.forward(s.images, tex(s));
    EXPECT_EQ(m.forward(s.images, tex(s)).values(), p.values());
    for (std::size_t i = 0; i < 6; ++i) {
      double sum = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_GE(p.at(i, k), 0.0);
        EXPECT_LE(p.at(i, k), 1.0);
        sum += p.at(i, k);
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Forward, TwoLayerToyMatchesManualComposition) {
  auto c = toy(ModelKind::dnn);
  c.input_shape = {1, 2, 3};
  Rng rng(5);
  nn::Sequential<double> image, head;
  image.add(nn::Flatten<double>());
  nn::Dense<double> d1(6, 3), d2(3, 4);
  d1.init(rng);
  d2.init(rng);
  for (auto* p : {d1.parameters()[1], d2.parameters()[1]})
    for (auto& v : p->values()) v = rng.uniform(-0.5, 0.5);
  const Tensor<double> W1 = *d1.parameters()[0], b1 = *d1.parameters()[1];
  const Tensor<double> W2 = *d2.parameters()[0], b2 = *d2.parameters()[1];
  image.add(std::move(d1));
  image.add(nn::ReLU<double>());
  head.add(std::move(d2));
  Model<double> m(c, std::move(image), {}, std::move(head));

  auto x = random_tensor({2, 1, 2, 3}, rng);
  auto p = m.forward(x);
  for (std::size_t n = 0; n < 2; ++n) {
    double h[3], z[4], zmax = -INFINITY, sum = 0;
    for (int j = 0; j < 3; ++j) {
      h[j] = b1[j];
      for (int i = 0; i < 6; ++i) h[j] += x[n * 6 + i] * W1.at(i, j);
      h[j] = std::max(h[j], 0.0);
    }
    for (int k = 0; k < 4; ++k) {
      z[k] = b2[k];
      for (int j = 0; j < 3; ++j) z[k] += h[j] * W2.at(j, k);
      zmax = std::max(zmax, z[k]);
    }
    for (int k = 0; k < 4; ++k) sum += std::exp(z[k] - zmax);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(p.at(n, k), std::exp(z[k] - zmax) / sum, 1e-12);
  }
}

TEST(Model, RejectsInconsistentGraphs) {
  auto c = toy(ModelKind::dnn);
  nn::Sequential<double> image, head;
  image.add(nn::Flatten<double>());
  head.add(nn::Dense<double>(64, 3));
  EXPECT_THROW(Model<double>(c, image, {}, head), ShapeError);
  nn::Sequential<double> texture;
  texture.add(nn::ReLU<double>());
  nn::Sequential<double> ok;
  ok.add(nn::Dense<double>(64, 4));
  EXPECT_THROW(Model<double>(c, image, texture, ok), std::invalid_argument);
}

TEST(Train, ZeroEpochsLeavesModelUnchanged) {
  auto c = toy(ModelKind::fusionnet);
  auto m = build(c, 1);
  const auto before = snapshot(m);
  Rng rng(6);
  auto s = random_set(c, 5, rng);
  nn::SGDConfig cfg;
  cfg.epochs = 0;
  EXPECT_TRUE(train(m, s, cfg).empty());
  EXPECT_EQ(snapshot(m), before);
  EXPECT_THROW(train(m, LabeledSet<double>{}, cfg), std::invalid_argument);
}

TEST(Train, FitsSeparableToySet) {
  auto c = toy(ModelKind::dnn);
  c.input_shape = {1, 2, 2};
  LabeledSet<double> s;
  std::vector<double> img;
  for (std::size_t k = 0; k < 4; ++k)
    for (int r = 0; r < 3; ++r) {
      for (std::size_t q = 0; q < 4; ++q) img.push_back(q == k ? 1.0 : 0.1 * r);
      s.labels.push_back(k);
      s.ids.push_back(s.ids.size());
    }
  s.images = Tensor<double>({12, 1, 2, 2}, img);
  auto m = build(c, 2);
  nn::SGDConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 4;
  cfg.epochs = 150;
  auto h = train(m, s, cfg);
  ASSERT_EQ(h.size(), 150u);
  EXPECT_EQ(h.back().train_acc, 1.0);
  EXPECT_TRUE(std::isnan(h.back().test_acc));
}

TEST(Train, HistoryIsBitwiseReproducible) {
  for (auto kind : {ModelKind::dnn, ModelKind::cnn, ModelKind::fusionnet}) {
    auto c = toy(kind);
    Rng rng(7);
    auto s = random_set(c, 11, rng), t = random_set(c, 4, rng);
    nn::SGDConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 4;
    cfg.epochs = 4;
    cfg.seed = 9;
    auto a = build(c, 3), b = build(c, 3);
    TrainHooks<double> hooks;
    hooks.test_set = &t;
    std::size_t calls = 0;
    hooks.on_epoch = [&](const EpochStats&) { ++calls; };
    auto ha = train(a, s, cfg, hooks), hb = train(b, s, cfg, hooks);
    EXPECT_EQ(calls, 8u);
    EXPECT_EQ(ha, hb);
    EXPECT_EQ(snapshot(a), snapshot(b));
    EXPECT_FALSE(std::isnan(ha.back().test_acc));
  }
}

TEST(Train, SmallLearningRateLossIsNonIncreasing) {
  auto c = toy(ModelKind::dnn);
  Rng rng(8);
  auto s = random_set(c, 16, rng);
  auto m = build(c, 4);
  nn::SGDConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 4;
  cfg.epochs = 30;
  auto h = train(m, s, cfg);
  for (std::size_t e = 1; e < h.size(); ++e)
    EXPECT_LE(h[e].train_loss, h[e - 1].train_loss + 1e-3) << "epoch " << h[e].epoch;
  EXPECT_LT(h.back().train_loss, h.front().train_loss);
}

TEST(Train, StorageOrderDoesNotMatter) {
  for (auto kind : {ModelKind::dnn, ModelKind::fusionnet}) {
    auto c = toy(kind);
    Rng rng(9);
    auto s = random_set(c, 10, rng);
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    auto permuted = s.subset(perm);
    nn::SGDConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 3;
    cfg.epochs = 3;
    cfg.seed = 1;
    auto a = build(c, 2), b = build(c, 2);
    train(a, s, cfg);
    train(b, permuted, cfg);
    EXPECT_EQ(snapshot(a), snapshot(b));
  }
}

TEST(Train, AblatedTextureBranchIgnoresSuppliedFeatures) {
  auto c = toy(ModelKind::fusionnet);
  Rng rng(10);
  auto s = random_set(c, 12, rng);
  auto m = build(c, 5);
  m.set_texture_ablated(true);
  const auto first_tex_weights = m.texture_branch()[0].parameters()[0]->values();
  nn::SGDConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 4;
  cfg.epochs = 5;
  train(m, s, cfg);
  // Zero inputs carry no gradient into the first texture weights.
  EXPECT_EQ(m.texture_branch()[0].parameters()[0]->values(), first_tex_weights);

  const auto p = m.forward(s.images, &s.textures);
  Tensor<double> zeros(s.textures.shape());
  auto noise = random_tensor(s.textures.shape(), rng, 0, 5);
  EXPECT_EQ(m.forward(s.images, &zeros).values(), p.values());
  EXPECT_EQ(m.forward(s.images, &noise).values(), p.values());
}

TEST(Train, DropoutMasksComeFromSeededStream) {
  auto c = toy(ModelKind::cnn);
  Rng rng(11);
  auto s = random_set(c, 4, rng);
  auto a = build(c, 6), b = build(c, 6);
  a.set_mode(Mode::train);
  b.set_mode(Mode::train);
  auto pa = a.forward(s.images), pb = b.forward(s.images);
  EXPECT_EQ(pa.values(), pb.values());
  EXPECT_NE(a.forward(s.images).values(), pa.values());
}
