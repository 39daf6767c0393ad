#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "slimmatch/gradcheck.hpp"
#include "slimmatch/matching.hpp"
#include "slimmatch/ops.hpp"
#include "test_util.hpp"

using namespace slimmatch;
using slimmatch::testing::random_tensor;
using slimmatch::testing::values;

namespace {

std::vector<Point2> grid_points(std::size_t n) {
  std::vector<Point2> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = {static_cast<double>(i), 0.0};
  return p;
}

std::vector<IndexPair> brute_force_mnn(const std::vector<double>& g, std::size_t n, double lambda) {
  std::vector<IndexPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = g[i * n + j];
      bool row_max = true, col_max = true;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != j && g[i * n + k] >= v) row_max = false;
        if (k != i && g[k * n + j] >= v) col_max = false;
      }
      if (row_max && col_max && v > lambda) out.push_back({i, j});
    }
  }
  return out;
}

MatchSet coarse_set(const std::vector<std::pair<Point2, Point2>>& pts) {
  MatchSet m;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    m.matches.push_back({pts[i].first, pts[i].second, 0.9});
    m.indices.push_back({i, i});
  }
  return m;
}

}  // namespace

TEST(ScoreMatrix, MatchesDoubleLoopOracle) {
  Rng rng(1);
  Tensor fa = random_tensor({5, 4}, rng, false), fb = random_tensor({6, 4}, rng, false);
  Tensor s = score_matrix(fa, fb);
  ASSERT_EQ(s.shape(), (Shape{5, 6}));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 4; ++k) acc += fa[i * 4 + k] * fb[j * 4 + k];
      EXPECT_NEAR(s[i * 6 + j], acc / 2.0, 1e-14);
      EXPECT_NEAR(score_matrix(fa, fb, false)[i * 6 + j], acc, 1e-14);
    }
}

TEST(ScoreMatrix, UnitRowsAndZeros) {
  Tensor eye = Tensor::from_data({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  auto s = values(score_matrix(eye, eye));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(s[i * 4 + j], i == j ? 0.5 : 0.0);
  for (double v : values(score_matrix(eye, Tensor::zeros({3, 4})))) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(score_matrix(eye, Tensor::zeros({4, 3})), ShapeError);
}

TEST(DualSoftmax, Examples) {
  for (double v : values(dual_softmax(Tensor::zeros({2, 2})))) EXPECT_DOUBLE_EQ(v, 0.25);
  auto g = values(dual_softmax(Tensor::from_data({2, 2}, {2, 0, 0, 2})));
  const double p = std::exp(2.0) / (std::exp(2.0) + 1.0);
  EXPECT_NEAR(g[0], p * p, 1e-14);
  EXPECT_NEAR(g[0], 0.7758, 1e-4);
  EXPECT_NEAR(g[1], 0.0142, 1e-4);
  EXPECT_NEAR(g[3], g[0], 1e-15);
}

TEST(DualSoftmaxProperty, BoundedByFactorsAndShiftInvariant) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    Tensor s = random_tensor({n, n}, rng, false, 3.0);
    auto g = values(dual_softmax(s));
    auto row = values(softmax(s, 1)), col = values(softmax(s, 0));
    for (std::size_t k = 0; k < g.size(); ++k) {
      EXPECT_GT(g[k], 0.0);
      EXPECT_LT(g[k], 1.0);
      EXPECT_LE(g[k], std::min(row[k], col[k]));
    }
    const double c = rng.uniform(-5, 5);
    std::vector<double> shifted = values(s);
    for (double& v : shifted) v += c;
    auto g2 = values(dual_softmax(Tensor::from_data({n, n}, shifted)));
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g2[k], g[k], 1e-12);
    EXPECT_EQ(mutual_nearest(g, n, n, 0.0), mutual_nearest(g2, n, n, 0.0));
  }
}

TEST(CoarseMatches, Examples) {
  auto d1 = extract_coarse_matches(Tensor::from_data({2, 2}, {0.9, 0.1, 0.2, 0.8}), 0.2,
                                   grid_points(2), grid_points(2));
  EXPECT_EQ(d1.indices, (std::vector<IndexPair>{{0, 0}, {1, 1}}));
  EXPECT_EQ(d1.matches[1].confidence, 0.8);
  EXPECT_EQ(d1.level, MatchLevel::coarse);
  auto d2 = extract_coarse_matches(Tensor::from_data({2, 2}, {0.5, 0.6, 0.7, 0.4}), 0.2,
                                   grid_points(2), grid_points(2));
  EXPECT_EQ(d2.indices, (std::vector<IndexPair>{{0, 1}, {1, 0}}));
  EXPECT_EQ(d2.matches[0].b, (Point2{1, 0}));
  auto d3 = extract_coarse_matches(Tensor::from_data({2, 2}, {0.9, 0.1, 0.2, 0.8}), 1.0,
                                   grid_points(2), grid_points(2));
  EXPECT_TRUE(d3.empty());
}

TEST(CoarseMatches, TiesAndThresholdAreStrict) {
  // Both rows have tied maxima, so nothing is strict.
  auto d = mutual_nearest({0.5, 0.5, 0.1, 0.1}, 2, 2, 0.0);
  EXPECT_TRUE(d.empty()) << d.size();
  EXPECT_TRUE(mutual_nearest({0.2, 0.1, 0.1, 0.1}, 2, 2, 0.2).empty());
  EXPECT_EQ(mutual_nearest({0.2, 0.1, 0.1, 0.05}, 2, 2, 0.19).size(), 1u);
}

TEST(CoarseMatchesProperty, EqualsBruteForceOn1000Matrices) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> g(64);
    // Coarse quantization makes ties common enough to exercise rejection.
    for (double& v : g) v = trial % 3 == 0 ? std::round(rng.uniform() * 8) / 8 : rng.uniform();
    const double lambda = rng.uniform(0.0, 0.6);
    const auto got = mutual_nearest(g, 8, 8, lambda);
    EXPECT_EQ(got, brute_force_mnn(g, 8, lambda)) << "trial " << trial;
    std::set<std::size_t> is, js;
    for (const auto& [i, j] : got) {
      EXPECT_TRUE(is.insert(i).second);
      EXPECT_TRUE(js.insert(j).second);
    }
  }
}

TEST(FineWindows, CenterRounding) {
  EXPECT_EQ(fine_cell(3.5), 2);
  EXPECT_EQ(fine_cell(3.0), 2);
  EXPECT_EQ(fine_cell(2.9), 1);
  EXPECT_EQ(fine_cell(0.0), 0);
  EXPECT_EQ(fine_cell(-1.0), 0);
  EXPECT_EQ(fine_cell(-1.1), -1);
}

TEST(FineWindows, InteriorCropEqualsSlice) {
  Rng rng(4);
  Tensor fa = random_tensor({3, 16, 16}, rng, false), fb = random_tensor({3, 16, 16}, rng, false);
  const MatchSet coarse = coarse_set({{{11.5, 11.5}, {15.5, 7.5}}, {{0.0, 0.0}, {31.0, 31.0}}});
  FineWindows w = crop_fine_windows(coarse, fa, fb);
  ASSERT_EQ(w.count(), 2u);
  ASSERT_EQ(w.a[0].shape(), (Shape{3, 5, 5}));
  // (11.5, 11.5) -> cell (6, 6); window rows/cols 4..8.
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t x = 0; x < 5; ++x) {
        EXPECT_EQ(w.a[0][(c * 5 + y) * 5 + x], fa[(c * 16 + 4 + y) * 16 + 4 + x]);
        // (15.5, 7.5) -> cell x=8, y=4.
        EXPECT_EQ(w.b[0][(c * 5 + y) * 5 + x], fb[(c * 16 + 2 + y) * 16 + 6 + x]);
      }
  // Border windows are zero-padded: cell (0,0) window starts at -2.
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(w.a[1][(c * 5 + 0) * 5 + 0], 0.0);
    EXPECT_EQ(w.a[1][(c * 5 + 2) * 5 + 2], fa[c * 256]);
    // (31, 31) -> cell 16, outside the 16-wide map except the top-left corner region.
    EXPECT_EQ(w.b[1][(c * 5 + 1) * 5 + 1], fb[(c * 16 + 15) * 16 + 15]);
    EXPECT_EQ(w.b[1][(c * 5 + 2) * 5 + 2], 0.0);
  }
  EXPECT_EQ(crop_fine_windows(MatchSet{}, fa, fb).count(), 0u);
  EXPECT_THROW(crop_fine_windows(coarse, fa, fb, 4), ConfigError);
}

TEST(FineRefine, ZeroHeadAndShapes) {
  Rng rng(5);
  const std::size_t c = 8;
  const AttentionOptions opt;
  std::vector<InterleaveLayer> layers{InterleaveLayer::init(c, 2, rng, opt)};
  FineHeadParams head = FineHeadParams::init(c, rng);
  std::vector<std::pair<Point2, Point2>> pts;
  for (int k = 0; k < 7; ++k) pts.push_back({{rng.uniform(0, 30), rng.uniform(0, 30)}, {rng.uniform(0, 30), rng.uniform(0, 30)}});
  const MatchSet coarse = coarse_set(pts);
  FineWindows w = crop_fine_windows(coarse, random_tensor({c, 16, 16}, rng, false),
                                    random_tensor({c, 16, 16}, rng, false));
  for (Tensor t : {head.confidence.bias, head.offset.bias}) {
    for (double& v : t.mutable_data()) v = 0;
  }
  FineOutput out = fine_refine(w, layers, head, opt);
  EXPECT_EQ(out.offset.shape(), (Shape{7, 2}));
  EXPECT_EQ(out.confidence.shape(), (Shape{7, 1}));
  for (double v : values(out.offset)) EXPECT_EQ(v, 0.0);
  for (double v : values(out.confidence)) EXPECT_EQ(v, 0.5);
  EXPECT_THROW(fine_refine(FineWindows{}, layers, head, opt), ShapeError);
}

TEST(FineRefine, GradientCheck) {
  Rng rng(6);
  const std::size_t c = 4;
  const AttentionOptions opt;
  std::vector<InterleaveLayer> layers{InterleaveLayer::init(c, 2, rng, opt, 0.5)};
  FineHeadParams head = FineHeadParams::init(c, rng);
  for (Tensor t : {head.confidence.weight, head.offset.weight}) {
    for (double& v : t.mutable_data()) v = 0.5 * rng.normal();
  }
  Tensor fa = random_tensor({c, 6, 6}, rng), fb = random_tensor({c, 6, 6}, rng);
  const MatchSet coarse = coarse_set({{{4, 4}, {6, 3}}, {{1, 9}, {10, 10}}});
  auto f = [&] {
    FineOutput o = fine_refine(crop_fine_windows(coarse, fa, fb, 3), layers, head, opt);
    return add(sum(o.offset), sum(o.confidence));
  };
  ParamSet set;
  head.collect(set, "head");
  layers[0].collect(set, "fine");
  std::vector<Tensor> ts{fa, fb};
  for (const auto& e : set.entries()) ts.push_back(e.tensor);
  // Max pooling is piecewise linear; a small step keeps central differences on one piece.
  auto r = finite_diff_check(f, ts, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-4) << "worst coordinate " << r.worst;
}

TEST(FineAssembly, Examples) {
  const MatchSet coarse = coarse_set({{{1, 2}, {3, 4}}, {{5, 6}, {7, 8}}});
  auto same = assemble_fine_matches(coarse, Tensor::zeros({2, 2}), Tensor::from_data({2, 1}, {0.1, 0.9}), 0.0);
  ASSERT_EQ(same.size(), 2u);
  EXPECT_EQ(same.level, MatchLevel::fine);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(same.matches[i].a, coarse.matches[i].a);
    EXPECT_EQ(same.matches[i].b, coarse.matches[i].b);
  }
  auto shifted = assemble_fine_matches(coarse, Tensor::from_data({2, 2}, {3, -4, 0, 0}),
                                       Tensor::from_data({2, 1}, {0.6, 0.4}));
  ASSERT_EQ(shifted.size(), 1u);
  EXPECT_EQ(shifted.matches[0].b, (Point2{6, 0}));
  EXPECT_EQ(shifted.matches[0].a, (Point2{1, 2}));
  EXPECT_EQ(shifted.matches[0].confidence, 0.6);
  EXPECT_TRUE(assemble_fine_matches(coarse, Tensor::zeros({2, 2}), Tensor::from_data({2, 1}, {0.6, 0.99}), 1.0).empty());
  EXPECT_THROW(assemble_fine_matches(coarse, Tensor::zeros({3, 2}), Tensor::zeros({2, 1})), ShapeError);
}
