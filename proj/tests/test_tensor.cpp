#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "slimmatch/gradcheck.hpp"
#include "slimmatch/ops.hpp"
#include "test_util.hpp"

using namespace slimmatch;
using slimmatch::testing::random_tensor;
using slimmatch::testing::values;

TEST(Tensor, MatmulExamples) {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(matmul(eye, m)), values(m));
  EXPECT_EQ(matmul(Tensor::from_data({1, 2}, {1, 2}), Tensor::from_data({2, 1}, {3, 4})).item(), 11.0);
}

TEST(Tensor, MatmulShapeErrorNamesShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Tensor, MatmulGradientIsOnesTimesBTransposed) {
  Rng rng(1);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  backward(sum(matmul(a, b)));
  auto g = a.grad();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(g[i * 4 + k], b[k * 2] + b[k * 2 + 1], 1e-12);
  auto r = finite_diff_check([&] { return sum(matmul(a, b)); }, std::vector<Tensor>{a, b}, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(Tensor, SoftmaxExamples) {
  EXPECT_EQ(values(softmax(Tensor::from_data({2}, {0, 0}), 0)), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(values(softmax(Tensor::from_data({2}, {1000, 1000}), 0)), (std::vector<double>{0.5, 0.5}));
  auto s = values(softmax(Tensor::from_data({2}, {0, std::log(3.0)}), 0));
  EXPECT_NEAR(s[0], 0.25, 1e-15);
  EXPECT_NEAR(s[1], 0.75, 1e-15);
  EXPECT_THROW(softmax(Tensor::zeros({2, 0}), 1), ShapeError);
}

TEST(Tensor, SoftmaxSumsToOneForExtremeInputs) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(6);
    const double mag = trial % 2 ? 1e4 : 1.0;
    Tensor x = random_tensor({rows, cols}, rng, false, mag);
    for (std::size_t axis = 0; axis < 2; ++axis) {
      auto s = values(softmax(x, axis));
      if (axis == 1) {
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = 0;
          for (std::size_t c = 0; c < cols; ++c) acc += s[r * cols + c];
          EXPECT_NEAR(acc, 1.0, 1e-12);
        }
      } else {
        for (std::size_t c = 0; c < cols; ++c) {
          double acc = 0;
          for (std::size_t r = 0; r < rows; ++r) acc += s[r * cols + c];
          EXPECT_NEAR(acc, 1.0, 1e-12);
        }
      }
      for (double v : s) EXPECT_TRUE(v >= 0 && std::isfinite(v));
    }
  }
}

TEST(Tensor, ElementwiseExamples) {
  EXPECT_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5);
  EXPECT_EQ(gelu(Tensor::scalar(0)).item(), 0.0);
  EXPECT_EQ(values(mul(Tensor::from_data({2}, {1, 2}), Tensor::from_data({2}, {3, 4}))),
            (std::vector<double>{3, 8}));
  // GELU(1) = 0.5 * (1 + erf(1/sqrt 2))
  EXPECT_NEAR(gelu(Tensor::scalar(1)).item(), 0.5 * (1 + std::erf(1 / std::sqrt(2.0))), 1e-15);
}

TEST(Tensor, BroadcastRules) {
  Tensor m = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row = Tensor::from_data({1, 3}, {10, 20, 30});
  EXPECT_EQ(values(add(m, row)), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  EXPECT_EQ(values(add(row, m)), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  EXPECT_EQ(values(mul(Tensor::scalar(2), m)), (std::vector<double>{2, 4, 6, 8, 10, 12}));
  EXPECT_THROW(add(m, Tensor::zeros({3, 2})), ShapeError);
  EXPECT_THROW(add(m, Tensor::zeros({2, 1})), ShapeError);
}

TEST(Tensor, BackwardBasics) {
  Tensor x = Tensor::scalar(3, true);
  backward(square(x));
  EXPECT_EQ(x.grad()[0], 6.0);

  Rng rng(3);
  Tensor v = random_tensor({5}, rng);
  backward(sum(softmax(v, 0)));
  for (double g : v.grad()) EXPECT_NEAR(g, 0.0, 1e-15);

  EXPECT_THROW(backward(Tensor::zeros({2}, true)), ShapeError);
}

TEST(Tensor, LeafGradientsAccumulateAndReset) {
  Tensor x = Tensor::scalar(2, true);
  backward(scale(x, 3));
  backward(scale(x, 3));
  EXPECT_EQ(x.grad()[0], 6.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Tensor, DetachedLeafGetsNoGradient) {
  Tensor x = Tensor::scalar(2, true);
  Tensor y = Tensor::scalar(5, true);
  backward(mul(x, y.detach()));
  EXPECT_EQ(x.grad()[0], 5.0);
  EXPECT_FALSE(y.has_grad());
  EXPECT_EQ(y.grad_or_zero()[0], 0.0);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  Tensor x = Tensor::scalar(2, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = square(x);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_enabled());
}

TEST(Tensor, FlopLedgerCountsMatmulExactly) {
  FlopLedger ledger;
  Tensor a = Tensor::zeros({3, 5}), b = Tensor::zeros({5, 7});
  {
    FlopRecording rec(ledger);
    matmul(a, b);
    EXPECT_EQ(ledger.count("matmul"), 3u * 5u * 7u);
    matmul(a, b);
  }
  EXPECT_EQ(ledger.count("matmul"), 2u * 3u * 5u * 7u);
  matmul(a, b);  // not recording
  EXPECT_EQ(ledger.total(), 2u * 3u * 5u * 7u);
  // Additions and activations are free.
  FlopLedger other;
  {
    FlopRecording rec(other);
    gelu(add(a, a));
  }
  EXPECT_EQ(other.total(), 0u);
}

TEST(Tensor, OpsAreDeterministic) {
  Rng r1(4), r2(4);
  Tensor a = random_tensor({4, 6}, r1), b = random_tensor({4, 6}, r2);
  auto f = [](const Tensor& t) { return values(gelu(matmul(softmax(t, 1), transpose(t)))); };
  EXPECT_EQ(f(a), f(b));
}

TEST(Tensor, FiniteDiffBilinearExact) {
  Tensor x = Tensor::scalar(2, true), y = Tensor::scalar(3, true);
  auto r = finite_diff_check([&] { return mul(x, y); }, std::vector<Tensor>{x, y}, 1e-3);
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(Tensor, FiniteDiffRejectsNonFinite) {
  Tensor x = Tensor::scalar(-1, true);
  EXPECT_THROW(finite_diff_check([&] { return log(x); }, std::vector<Tensor>{x}, 1e-3), NumericError);
}

// Every differentiable op against central differences on random instances.
TEST(TensorProperty, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&, const Tensor&)> f;
    bool positive;
  };
  const std::vector<Case> cases = {
      {"add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, false},
      {"sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, false},
      {"mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, false},
      {"mul_row", [](const Tensor& a, const Tensor& b) { return mul(a, slice(b, 0, 0, 1)); }, false},
      {"matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, transpose(b)); }, false},
      {"softmax0", [](const Tensor& a, const Tensor&) { return softmax(a, 0); }, false},
      {"softmax1", [](const Tensor& a, const Tensor&) { return softmax(a, 1); }, false},
      {"gelu", [](const Tensor& a, const Tensor&) { return gelu(a); }, false},
      {"sigmoid", [](const Tensor& a, const Tensor&) { return sigmoid(a); }, false},
      {"log", [](const Tensor& a, const Tensor&) { return log(a); }, true},
      {"exp", [](const Tensor& a, const Tensor&) { return exp(a); }, false},
      {"pow", [](const Tensor& a, const Tensor&) { return pow(a, 2.5); }, true},
      {"square", [](const Tensor& a, const Tensor&) { return square(a); }, false},
      {"concat", [](const Tensor& a, const Tensor& b) { return concat({a, b}, 1); }, false},
      {"gather", [](const Tensor& a, const Tensor&) { return gather_rows(a, {2, 0, 2}); }, false},
      {"linear", [](const Tensor& a, const Tensor& b) { return linear(a, transpose(b), slice(b, 0, 0, 1)); }, false},
      {"reshape", [](const Tensor& a, const Tensor&) { return reshape(a, {a.numel()}); }, false},
  };
  for (const auto& c : cases) {
    for (int trial = 0; trial < 100; ++trial) {
      Tensor a = random_tensor({3, 3}, rng);
      Tensor b = random_tensor({3, 3}, rng);
      if (c.positive) {
        for (double& v : a.mutable_data()) v = std::abs(v) + 0.5;
      }
      Tensor w = random_tensor({3, 3}, rng, false);  // random projection of the output
      auto loss = [&] {
        Tensor y = c.f(a, b);
        std::vector<double> weights(y.numel());
        for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = w[i % 9] + 0.1 * static_cast<double>(i);
        return sum(mul(y, Tensor::from_data(y.shape(), weights)));
      };
      auto r = finite_diff_check(loss, std::vector<Tensor>{a, b}, 1e-6);
      ASSERT_LT(r.max_rel_error, 1e-4) << c.name << " trial " << trial;
    }
  }
}
