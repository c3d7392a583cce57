#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "seatlab/ops.hpp"
#include "seatlab/tensor.hpp"

using namespace seatlab;

namespace {

Tensor leaf(Shape shape, std::vector<Real> values) {
  Tensor t(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

}  // namespace

TEST(Tensor, FanOutAccumulates) {
  Tensor x = leaf({1}, {1.5});
  add(x, x).backward();
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Tensor, SquareGradient) {
  Tensor x = leaf({1}, {3});
  mul(x, x).backward();
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Tensor, GradientsAccumulateAcrossBackwardCalls) {
  Tensor x = leaf({2}, {1, 2});
  sum(x).backward();
  sum(scalar_mul(x, 3)).backward();
  EXPECT_EQ(x.grad()[0], 4.0);
  EXPECT_EQ(x.grad()[1], 4.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
  x.clear_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Tensor, RejectsNonScalarLoss) {
  Tensor x = leaf({2}, {1, 2});
  EXPECT_THROW(add(x, x).backward(), std::invalid_argument);
}

TEST(Tensor, RejectsLossOffTape) {
  Tensor x({1}, {2.0});
  EXPECT_THROW(mul(x, x).backward(), std::invalid_argument);
}

TEST(Tensor, GraphReleasedAfterBackward) {
  Tensor x = leaf({2}, {1, 2});
  Tensor y = sum(mul(x, x));
  EXPECT_FALSE(y.is_leaf());
  y.backward();
  EXPECT_TRUE(y.node()->parents.empty());
}

TEST(Tensor, NoGraphWithoutRequiresGrad) {
  Tensor x({2}, {1, 2});
  Tensor y = mul(x, x);
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, DetachAndClone) {
  Tensor x = leaf({2}, {1, 2});
  Tensor d = x.detach();
  EXPECT_FALSE(d.requires_grad());
  d.at(0) = 9;
  EXPECT_EQ(x.at(0), 1.0);
  Tensor c = x.clone();
  EXPECT_TRUE(c.requires_grad());
  EXPECT_NE(c.node(), x.node());
}

TEST(Tensor, ScopedRequiresGradRestores) {
  Tensor a = leaf({1}, {1});
  Tensor b({1}, {1.0});
  {
    ScopedRequiresGrad scope({a, b}, false);
    EXPECT_FALSE(a.requires_grad());
    EXPECT_FALSE(b.requires_grad());
  }
  EXPECT_TRUE(a.requires_grad());
  EXPECT_FALSE(b.requires_grad());
}

TEST(Tensor, RejectsDataLengthMismatch) { EXPECT_THROW(Tensor({2, 2}, std::vector<Real>{1, 2, 3}), std::invalid_argument); }

TEST(Elementwise, Examples) {
  EXPECT_EQ(log(Tensor::scalar(1)).item(), 0.0);
  EXPECT_DOUBLE_EQ(leaky_relu(Tensor::scalar(-2), 0.2).item(), -0.4);
  Tensor x = leaf({4}, {1, 2, 3, 4});
  Tensor m = mean(x);
  EXPECT_EQ(m.item(), 2.5);
  m.backward();
  for (Real g : x.grad()) EXPECT_EQ(g, 0.25);
}

TEST(Elementwise, LogClampHasZeroGradient) {
  Tensor x = leaf({2}, {1e-9, 0.5});
  Tensor y = sum(log(x));
  EXPECT_DOUBLE_EQ(y.item(), std::log(1e-7) + std::log(0.5));
  y.backward();
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2.0);
}

TEST(Elementwise, RejectsShapeMismatch) {
  EXPECT_THROW(add(Tensor({2}), Tensor({3})), std::invalid_argument);
  EXPECT_THROW(mul(Tensor({2, 1}), Tensor({1, 2})), std::invalid_argument);
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  Tensor in = oracle::randn({1, 4, 5}, rng);
  Tensor out = conv2d(in, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}), 1, 0);
  ASSERT_EQ(out.shape(), in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) EXPECT_EQ(out.at(i), in.at(i));
}

TEST(Conv2d, OnesKernelOnConstant) {
  Tensor out = conv2d(Tensor({1, 5, 5}, 0.7), Tensor({1, 1, 3, 3}, 1.0), Tensor({1}), 1, 0);
  ASSERT_EQ(out.shape(), (Shape{1, 3, 3}));
  for (Real v : out.data()) EXPECT_NEAR(v, 9 * 0.7, 1e-15);
}

TEST(Conv2d, OutputShape) {
  Tensor out = conv2d(Tensor({2, 16, 12}), Tensor({3, 2, 4, 4}), Tensor({3}), 2, 1);
  EXPECT_EQ(out.shape(), (Shape{3, 8, 6}));
}

TEST(Conv2d, RejectsChannelMismatch) {
  EXPECT_THROW(conv2d(Tensor({2, 5, 5}), Tensor({1, 3, 3, 3}), Tensor({1}), 1, 0), std::invalid_argument);
  EXPECT_THROW(conv2d(Tensor({3, 2, 2}), Tensor({1, 3, 3, 3}), Tensor({1}), 1, 0), std::invalid_argument);
}

TEST(Conv2d, BatchOfTwoMatchesNestedLoops) {
  std::mt19937_64 rng(2);
  Tensor w = oracle::randn({4, 3, 3, 3}, rng);
  Tensor b = oracle::randn({4}, rng);
  for (int i = 0; i < 2; ++i) {
    Tensor in = oracle::randn({3, 5, 5}, rng);
    const auto ref = oracle::conv2d(in, w, b, 1, 0);
    Tensor out = conv2d(in, w, b, 1, 0);
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_LT(std::abs(out.at(k) - ref[k]), 1e-12);
  }
}

TEST(Conv2d, BitIdenticalToNestedLoopsOnRandomShapes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t ci = oracle::pick(rng, 1, 4), co = oracle::pick(rng, 1, 4);
    const std::size_t k = oracle::pick(rng, 1, 4), stride = oracle::pick(rng, 1, 2), pad = oracle::pick(rng, 0, 2);
    const std::size_t h = oracle::pick(rng, k, 9), w = oracle::pick(rng, k, 9);
    Tensor in = oracle::randn({ci, h, w}, rng);
    Tensor wt = oracle::randn({co, ci, k, k}, rng);
    Tensor b = oracle::randn({co}, rng);
    const auto ref = oracle::conv2d(in, wt, b, stride, pad);
    Tensor out = conv2d(in, wt, b, stride, pad);
    ASSERT_EQ(out.numel(), ref.size()) << "trial " << trial;
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_EQ(out.at(i), ref[i]) << "trial " << trial << " index " << i;
  }
}

TEST(Softmax, Examples) {
  Tensor u = softmax_channels(Tensor({3, 1, 1}));
  for (Real v : u.data()) EXPECT_NEAR(v, 1.0 / 3, 1e-15);
  Tensor p = softmax_channels(Tensor({2, 1, 1}, {0, std::log(2.0)}));
  EXPECT_NEAR(p.at(0), 1.0 / 3, 1e-15);
  EXPECT_NEAR(p.at(1), 2.0 / 3, 1e-15);
}

TEST(Softmax, SimplexAndShiftInvariance) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = oracle::randn({5, 3, 4}, rng, 10);
    Tensor shifted = affine(logits, 1, 7.3);
    Tensor p = softmax_channels(logits), q = softmax_channels(shifted);
    for (std::size_t px = 0; px < 12; ++px) {
      Real s = 0;
      for (std::size_t c = 0; c < 5; ++c) {
        EXPECT_GT(p.at(c * 12 + px), 0.0);
        s += p.at(c * 12 + px);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
    for (std::size_t i = 0; i < p.numel(); ++i) EXPECT_NEAR(p.at(i), q.at(i), 1e-9);
  }
}

TEST(Softmax, CrossEntropyGradientIsPMinusOneHot) {
  Tensor logits = leaf({3, 1, 1}, {0.2, -1.0, 0.7});
  Tensor p = softmax_channels(logits);
  const std::vector<std::uint8_t> label{2};
  Tensor loss = scalar_mul(select_mean(log(p), label, kIgnoreIndex), -1);
  loss.backward();
  const Tensor probs = softmax_channels(logits.detach());
  EXPECT_NEAR(logits.grad()[0], probs.at(0), 1e-14);
  EXPECT_NEAR(logits.grad()[1], probs.at(1), 1e-14);
  EXPECT_NEAR(logits.grad()[2], probs.at(2) - 1, 1e-14);
}

TEST(Bilinear, IdentityAndConstant) {
  std::mt19937_64 rng(5);
  Tensor x = oracle::randn({2, 3, 4}, rng);
  Tensor y = bilinear_upsample(x, 3, 4);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x.at(i), y.at(i));
  Tensor c = bilinear_upsample(Tensor({1, 2, 3}, 0.3), 7, 9);
  for (Real v : c.data()) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Bilinear, TwoByTwoToFourByFour) {
  Tensor y = bilinear_upsample(Tensor({1, 2, 2}, {1, 2, 3, 4}), 4, 4);
  const std::vector<Real> expected{1.0, 1.25, 1.75, 2.0, 1.5, 1.75, 2.25, 2.5,
                                   2.5, 2.75, 3.25, 3.5, 3.0, 3.25, 3.75, 4.0};
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(y.at(i), expected[i], 1e-15) << i;
}

TEST(Bilinear, RejectsDownsampling) { EXPECT_THROW(bilinear_upsample(Tensor({1, 4, 4}), 2, 4), std::invalid_argument); }

TEST(SelectMean, SkipsIgnoredPixels) {
  Tensor x = leaf({2, 1, 3}, {1, 2, 3, 10, 20, 30});
  const std::vector<std::uint8_t> labels{1, kIgnoreIndex, 0};
  Tensor y = select_mean(x, labels, kIgnoreIndex);
  EXPECT_DOUBLE_EQ(y.item(), (10 + 3) / 2.0);
  y.backward();
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[4], 0.0);
  EXPECT_EQ(x.grad()[2], 0.5);
  EXPECT_EQ(x.grad()[3], 0.5);
}

TEST(SelectMean, AllIgnoredIsZero) {
  Tensor x = leaf({2, 1, 2}, {1, 2, 3, 4});
  const std::vector<std::uint8_t> labels{kIgnoreIndex, kIgnoreIndex};
  Tensor y = select_mean(x, labels, kIgnoreIndex);
  EXPECT_EQ(y.item(), 0.0);
  y.backward();
  for (Real g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(SelectMean, RejectsOutOfRangeLabel) {
  const std::vector<std::uint8_t> labels{2};
  EXPECT_THROW(select_mean(Tensor({2, 1, 1}), labels, kIgnoreIndex), std::invalid_argument);
}

TEST(BatchNormOp, MatchesFormulaOnBatchedInput) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = oracle::randn({3, 2, 4, 5}, rng, 2);
    Tensor gamma = oracle::randn({2}, rng), beta = oracle::randn({2}, rng);
    BatchNormStats stats;
    Tensor y = batch_norm(x, gamma, beta, 1e-5, nullptr, &stats);
    const auto ref = oracle::batch_norm(x, {gamma.at(0), gamma.at(1)}, {beta.at(0), beta.at(1)}, 1e-5);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.at(i), ref[i], 1e-12);
    ASSERT_EQ(stats.mean.size(), 2u);
  }
}

TEST(BatchNormOp, FixedStatisticsAreConstants) {
  Tensor x({1, 1, 2}, {1, 3});
  const BatchNormStats fixed{{1.0}, {4.0}};
  Tensor y = batch_norm(x, Tensor({1}, 2.0), Tensor({1}, 0.5), 0, &fixed);
  EXPECT_DOUBLE_EQ(y.at(0), 0.5);
  EXPECT_DOUBLE_EQ(y.at(1), 2.0 * 2 / 2 + 0.5);
}

TEST(BatchNormOp, RejectsBadShapes) {
  EXPECT_THROW(batch_norm(Tensor({4}), Tensor({4}), Tensor({4}), 1e-5, nullptr), std::invalid_argument);
  EXPECT_THROW(batch_norm(Tensor({2, 3, 3}), Tensor({3}), Tensor({3}), 1e-5, nullptr), std::invalid_argument);
}
