#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "futi/lbp.hpp"
#include "futi/random.hpp"
#include "oracles.hpp"

using namespace futi;
using namespace futi::lbp;

namespace {

std::uint32_t code_of(double center, std::vector<double> nb) {
  return lbp_code<double>(center, nb, static_cast<int>(nb.size()));
}

Tensor<double> grid(std::size_t h, std::size_t w, std::vector<double> v) {
  return Tensor<double>({h, w}, std::move(v));
}

// Point sample by explicit four-corner weights.
double bilinear_point(const Tensor<double>& g, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  double acc = 0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const double w = (1 - std::abs(y - (y0 + dy))) * (1 - std::abs(x - (x0 + dx)));
      if (w > 0) acc += w * g.at(y0 + dy, x0 + dx);
    }
  return acc;
}

}  // namespace

TEST(Grayscale, WhiteRedAndGray) {
  Tensor<double> white({3, 2, 2}, 255.0);
  for (double v : to_grayscale(white).values()) EXPECT_NEAR(v, 255.0, 1e-9);

  Tensor<double> red({3, 1, 2});
  red.at(0, 0, 0) = red.at(0, 0, 1) = 255;
  for (double v : to_grayscale(red).values()) EXPECT_NEAR(v, 76.245, 1e-9);

  Rng rng(1);
  Tensor<double> gray({3, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) {
    const double g = static_cast<double>(rng.below(256));
    gray[i] = gray[16 + i] = gray[32 + i] = g;
  }
  auto out = to_grayscale(gray);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(out[i], gray[i]);

  EXPECT_THROW(to_grayscale(Tensor<double>({2, 4, 4})), ShapeError);
}

TEST(LbpCode, HandCases) {
  EXPECT_EQ(code_of(5, {6, 2, 7, 5, 3, 1, 8, 4}), 77u);
  EXPECT_EQ(code_of(5, std::vector<double>(8, 5)), 255u);
  EXPECT_EQ(code_of(5, std::vector<double>(8, 4.99)), 0u);
  EXPECT_THROW((lbp_code<double>(5, std::vector<double>{1, 2, 3}, 8)), std::invalid_argument);
  EXPECT_THROW((lbp_code<double>(5, std::vector<double>(8, 1), 4)), std::invalid_argument);
}

TEST(LbpCode, ShiftAndPositiveScaleInvariant) {
  Rng rng(2);
  for (int t = 0; t < 500; ++t) {
    const double c = static_cast<double>(rng.below(256));
    std::vector<double> nb(8), shifted(8), scaled(8);
    for (int p = 0; p < 8; ++p) nb[p] = static_cast<double>(rng.below(256));
    const double k = static_cast<double>(rng.below(200)) - 100;
    const double a = 0.1 + 10 * rng.uniform();
    for (int p = 0; p < 8; ++p) {
      shifted[p] = nb[p] + k;
      scaled[p] = nb[p] * a;
    }
    const auto base = code_of(c, nb);
    EXPECT_EQ(code_of(c + k, shifted), base);
    EXPECT_EQ(code_of(c * a, scaled), base);
  }
}

TEST(NeighborOffsets, EastFirstCounterClockwise) {
  const auto off = neighbor_offsets(LBPConfig{});
  ASSERT_EQ(off.size(), 8u);
  EXPECT_EQ(off[0].dy, 0);
  EXPECT_EQ(off[0].dx, 1);
  EXPECT_EQ(off[2].dy, -1);
  EXPECT_EQ(off[2].dx, 0);
  EXPECT_EQ(off[4].dx, -1);
  EXPECT_EQ(off[6].dy, 1);
  EXPECT_NEAR(off[1].dy, -std::numbers::sqrt2 / 2, 1e-12);
  EXPECT_NEAR(off[1].dx, std::numbers::sqrt2 / 2, 1e-12);
}

TEST(LbpMap, ConstantImageGives255Inside) {
  Tensor<double> g({6, 7}, 42.0);
  for (auto interp : {Interpolation::nearest, Interpolation::bilinear}) {
    auto codes = lbp_map(g, LBPConfig{8, 1.0, interp});
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 7; ++c) {
        const bool border = r == 0 || c == 0 || r == 5 || c == 6;
        EXPECT_EQ(codes.at(r, c), border ? 0u : 255u);
      }
  }
}

// With s(0) = 1 a bright pixel's neighbours see every sample >= themselves,
// so the one-zero-bit pattern appears around a dark pixel on a bright field.
TEST(LbpMap, IsolatedPixelNeighbourhoods) {
  Tensor<double> dark({7, 7}, 200.0);
  dark.at(3, 3) = 10;
  auto codes = lbp_map(dark);
  EXPECT_EQ(codes.at(3, 3), 255u);
  // Bit index of the centre as seen from each neighbour (opposite direction).
  const int dr[8] = {0, -1, -1, -1, 0, 1, 1, 1}, dc[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  for (int p = 0; p < 8; ++p) {
    const auto q = codes.at(3 + dr[p], 3 + dc[p]);
    EXPECT_EQ(std::popcount(q), 7) << "neighbour " << p;
    EXPECT_EQ(q, 255u & ~(1u << ((p + 4) % 8)));
  }

  Tensor<double> bright({7, 7}, 10.0);
  bright.at(3, 3) = 200;
  auto bc = lbp_map(bright);
  EXPECT_EQ(bc.at(3, 3), 0u);
  for (int p = 0; p < 8; ++p) EXPECT_EQ(bc.at(3 + dr[p], 3 + dc[p]), 255u);
}

TEST(LbpMap, MatchesSlidingWindowOracle) {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    auto g = test::random_gray(3 + rng.below(20), 3 + rng.below(20), rng);
    auto codes = lbp_map(g);
    auto ref = test::sliding_window_lbp(g);
    ASSERT_EQ(codes.values(), ref.values());
  }
}

TEST(LbpMap, AgreesWithPerPixelCodes) {
  Rng rng(4);
  const LBPConfig cfgs[] = {{8, 1.0, Interpolation::nearest},
                            {8, 1.5, Interpolation::bilinear},
                            {16, 2.0, Interpolation::bilinear},
                            {4, 1.0, Interpolation::nearest}};
  for (const auto& cfg : cfgs) {
    auto g = test::random_gray(12, 11, rng);
    auto codes = lbp_map(g, cfg);
    const auto m = static_cast<int>(std::ceil(cfg.radius));
    for (int r = m; r < 12 - m; ++r)
      for (int c = m; c < 11 - m; ++c) {
        std::vector<double> nb(cfg.points);
        for (int p = 0; p < cfg.points; ++p) {
          const double th = 2 * std::numbers::pi * p / cfg.points;
          double y = r - cfg.radius * std::sin(th), x = c + cfg.radius * std::cos(th);
          if (std::abs(y - std::round(y)) < 1e-9) y = std::round(y);
          if (std::abs(x - std::round(x)) < 1e-9) x = std::round(x);
          nb[p] = cfg.interpolation == Interpolation::nearest
                      ? g.at(std::size_t(std::lround(y)), std::size_t(std::lround(x)))
                      : bilinear_point(g, y, x);
        }
        // Bilinear samples from two formulas may differ in the last ulp; skip exact ties.
        bool near_tie = false;
        for (double v : nb) near_tie |= v != g.at(r, c) && std::abs(v - g.at(r, c)) < 1e-9;
        if (near_tie) continue;
        EXPECT_EQ(codes.at(r, c), lbp_code<double>(g.at(r, c), nb, cfg.points));
      }
  }
}

TEST(LbpMap, RejectsTinyImages) {
  EXPECT_THROW(lbp_map(Tensor<double>({2, 5})), ShapeError);
  EXPECT_THROW(lbp_map(Tensor<double>({4, 9}), LBPConfig{8, 2.0}), ShapeError);
  EXPECT_THROW(lbp_map(Tensor<double>({5, 5}), LBPConfig{3, 1.0}), std::invalid_argument);
}

TEST(LbpHistogram, HandEnumeratedFourByFour) {
  // Interior codes worked out by hand: (1,1)=213, (1,2)=250, (2,1)=175, (2,2)=65.
  auto g = grid(4, 4, {0, 9, 0, 9, 9, 5, 5, 0, 0, 5, 9, 9, 9, 0, 9, 0});
  auto codes = lbp_map(g);
  EXPECT_EQ(codes.at(1, 1), 213u);
  EXPECT_EQ(codes.at(1, 2), 250u);
  EXPECT_EQ(codes.at(2, 1), 175u);
  EXPECT_EQ(codes.at(2, 2), 65u);
  auto raw = lbp_histogram(codes, {}, false);
  ASSERT_EQ(raw.histogram.size(), 256u);
  for (std::size_t b = 0; b < 256; ++b) {
    const bool hit = b == 213 || b == 250 || b == 175 || b == 65;
    EXPECT_EQ(raw.histogram[b], hit ? 1.0 : 0.0) << "bin " << b;
  }
  auto norm = lbp_histogram(codes);
  EXPECT_EQ(norm.histogram[65], 0.25);
}

TEST(LbpHistogram, ConstantImageMassInBin255) {
  auto f = extract_features(Tensor<double>({9, 9}, 17.0));
  EXPECT_EQ(f.histogram[255], 1.0);
  EXPECT_EQ(std::accumulate(f.histogram.begin(), f.histogram.end(), 0.0), 1.0);
}

TEST(LbpHistogram, MassAndNormalization) {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const std::size_t h = 3 + rng.below(30), w = 3 + rng.below(30);
    auto g = test::random_gray(h, w, rng);
    auto codes = lbp_map(g);
    auto raw = lbp_histogram(codes, {}, false);
    EXPECT_EQ(std::accumulate(raw.histogram.begin(), raw.histogram.end(), 0.0),
              double((h - 2) * (w - 2)));
    auto norm = lbp_histogram(codes);
    EXPECT_NEAR(std::accumulate(norm.histogram.begin(), norm.histogram.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(LbpHistogram, RejectsOutOfRangeCodes) {
  Tensor<std::uint32_t> codes({4, 4});
  codes.at(1, 1) = 256;
  EXPECT_THROW(lbp_histogram(codes), std::out_of_range);
  Tensor<std::uint32_t> border({4, 4});
  border.at(0, 0) = 999;
  EXPECT_NO_THROW(lbp_histogram(border));
}
