#include <gtest/gtest.h>

#include "slimmatch/backbone.hpp"
#include "slimmatch/ftm.hpp"
#include "slimmatch/gradcheck.hpp"
#include "slimmatch/ops.hpp"
#include "test_util.hpp"

using namespace slimmatch;
using slimmatch::testing::random_tensor;
using slimmatch::testing::values;

TEST(Backbone, GridKeypoints) {
  const auto p16 = grid_keypoints(16, 16);
  ASSERT_EQ(p16.size(), 4u);
  EXPECT_EQ(p16[0], (Point2{3.5, 3.5}));
  EXPECT_EQ(p16[1], (Point2{11.5, 3.5}));
  EXPECT_EQ(p16[2], (Point2{3.5, 11.5}));
  EXPECT_EQ(p16[3], (Point2{11.5, 11.5}));
  EXPECT_EQ(grid_keypoints(8, 8), (std::vector<Point2>{{3.5, 3.5}}));
  EXPECT_THROW(grid_keypoints(12, 16), ShapeError);
}

TEST(BackboneProperty, KeypointsInsideTheirCells) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 8 * (1 + rng.below(6)), w = 8 * (1 + rng.below(6));
    const auto pts = grid_keypoints(h, w);
    ASSERT_EQ(pts.size(), (h / 8) * (w / 8));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double r = static_cast<double>(i / (w / 8)), c = static_cast<double>(i % (w / 8));
      EXPECT_GT(pts[i].x, 8 * c);
      EXPECT_LT(pts[i].x, 8 * c + 8);
      EXPECT_GT(pts[i].y, 8 * r);
      EXPECT_LT(pts[i].y, 8 * r + 8);
    }
  }
}

TEST(Backbone, OutputShapesTinyAndFull) {
  Rng rng(2);
  const auto tiny = BackboneConfig::tiny();
  auto pt = BackboneParams::init(tiny, rng);
  auto f = extract_features(Image(16, 16, 0.5), tiny, pt);
  EXPECT_EQ(f.coarse.shape(), (Shape{16, 2, 2}));
  EXPECT_EQ(f.fine.shape(), (Shape{8, 8, 8}));
  EXPECT_EQ(f.keypoints.size(), 4u);

  const auto full = BackboneConfig::full();
  auto pf = BackboneParams::init(full, rng);
  NoGradGuard guard;
  auto g = extract_features(Image(64, 64, 0.5), full, pf);
  EXPECT_EQ(g.coarse.shape(), (Shape{192, 8, 8}));
  EXPECT_EQ(g.fine.shape(), (Shape{96, 32, 32}));
}

TEST(Backbone, RejectsSizesNotDivisibleBy8WithHint) {
  Rng rng(3);
  auto p = BackboneParams::init(BackboneConfig::tiny(), rng);
  try {
    extract_features(Image(20, 16), BackboneConfig::tiny(), p);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("pad by 4 rows"), std::string::npos) << e.what();
  }
}

TEST(Backbone, StemGradientMatchesFiniteDifferences) {
  Rng rng(4);
  const auto cfg = BackboneConfig::tiny();
  auto p = BackboneParams::init(cfg, rng);
  Image img(16, 16);
  for (double& v : img.values) v = rng.uniform();
  std::vector<ParamCoord> coords;
  for (std::size_t i = 0; i < p.stem.weight.numel(); i += 7) coords.push_back({p.stem.weight, i});
  auto r = finite_diff_check([&] { return sum(extract_features(img, cfg, p).coarse); }, coords, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Backbone, CoarseMapShiftsWithEightPixelShift) {
  // Moving a patch by one cell moves the coarse response by one token.
  Rng rng(5);
  const auto cfg = BackboneConfig::tiny();
  auto p = BackboneParams::init(cfg, rng);
  NoGradGuard guard;
  auto with_patch = [&](std::size_t top, std::size_t left) {
    Image img(256, 256, 0.25);
    for (std::size_t y = top; y < top + 5; ++y)
      for (std::size_t x = left; x < left + 5; ++x) img.at(y, x) = 1.0;
    return extract_features(img, cfg, p);
  };
  const auto f = with_patch(122, 122), g = with_patch(122, 130);
  ASSERT_EQ(f.coarse_width, 32u);
  const std::size_t n = 1024;
  // Cells far enough from the border that zero padding never reaches them.
  for (std::size_t r = 14; r <= 17; ++r)
    for (std::size_t c = 14; c <= 16; ++c)
      for (std::size_t ch = 0; ch < cfg.coarse_channels; ++ch)
        ASSERT_NEAR(g.coarse[ch * n + r * 32 + c + 1], f.coarse[ch * n + r * 32 + c], 1e-12) << r << "," << c;
  EXPECT_EQ(f.keypoints[15 * 32 + 16], (Point2{131.5, 123.5}));
}

TEST(Ftm, ShapesAndZeroWeights) {
  Rng rng(6);
  auto p = FtmParams::init(192, rng);
  Tensor x = random_tensor({192, 4, 4}, rng, false);
  {
    NoGradGuard guard;
    EXPECT_EQ(feature_transition(x, p).shape(), (Shape{192, 4, 4}));
  }
  for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(p.pointwise[b].weight.shape(), (Shape{48, 192, 1, 1}));
  ParamSet set;
  p.collect(set, "ftm");
  for (const auto& e : set.entries()) {
    Tensor t = e.tensor;
    for (double& v : t.mutable_data()) v = 0.0;
  }
  for (double v : values(feature_transition(x, p))) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(FtmParams::init(6, rng), ConfigError);
  auto p8 = FtmParams::init(8, rng);
  EXPECT_THROW(feature_transition(Tensor::zeros({6, 4, 4}), p8), ConfigError);
  EXPECT_THROW(feature_transition(Tensor::zeros({12, 4, 4}), p8), ShapeError);
}

TEST(FtmProperty, BranchesEqualDenseRankConstrainedConvolution) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t c = 8, h = 4 + rng.below(4), w = 4 + rng.below(4);
    auto p = FtmParams::init(c, rng);
    for (auto& dw : p.depthwise) {
      Tensor b = dw.bias;
      for (double& v : b.mutable_data()) v = rng.normal();
    }
    Tensor x = random_tensor({c, h, w}, rng, false);
    const auto y = values(feature_transition(x, p));
    for (std::size_t br = 0; br < 4; ++br) {
      const std::size_t k = kFtmKernels[br];
      // Dense kernel W[o][i] = P[o][i] * D[i]; bias = P * b_dw + b_pw.
      Tensor dense = Tensor::zeros({c / 4, c, k, k});
      Tensor bias = Tensor::zeros({c / 4});
      for (std::size_t o = 0; o < c / 4; ++o) {
        double acc = p.pointwise[br].bias[o];
        for (std::size_t i = 0; i < c; ++i) {
          const double pw = p.pointwise[br].weight[o * c + i];
          acc += pw * p.depthwise[br].bias[i];
          for (std::size_t t = 0; t < k * k; ++t) {
            dense.mutable_data()[(o * c + i) * k * k + t] = pw * p.depthwise[br].weight[i * k * k + t];
          }
        }
        bias.mutable_data()[o] = acc;
      }
      const auto want = values(conv2d(x, dense, bias, {ConvMode::standard, 1, (k - 1) / 2}));
      for (std::size_t n = 0; n < want.size(); ++n) {
        ASSERT_NEAR(y[br * want.size() + n], want[n], 1e-10) << "branch " << br;
      }
    }
  }
}

TEST(Ftm, GradientCheck) {
  Rng rng(8);
  auto p = FtmParams::init(8, rng);
  Tensor x = random_tensor({8, 4, 5}, rng);
  Tensor proj = random_tensor({8, 4, 5}, rng, false);
  ParamSet set;
  p.collect(set, "ftm");
  std::vector<Tensor> ts{x};
  for (const auto& e : set.entries()) ts.push_back(e.tensor);
  auto r = finite_diff_check([&] { return sum(mul(feature_transition(x, p), proj)); }, ts, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-4);
}
