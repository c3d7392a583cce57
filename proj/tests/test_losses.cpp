#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "seatlab/losses.hpp"
#include "seatlab/ops.hpp"

using namespace seatlab;

namespace {

std::vector<Tensor> random_d_outputs(std::size_t m, std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(oracle::uniform({1, h, w}, rng, 0.001, 0.999));
  return out;
}

std::vector<Real> random_simplex(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<Real> u(0.01, 1);
  std::vector<Real> v(n);
  Real s = 0;
  for (Real& x : v) s += x = u(rng);
  for (Real& x : v) x /= s;
  return v;
}

}  // namespace

TEST(LossDis, AnalyticValues) {
  const std::vector<Tensor> half{Tensor({1, 2, 2}, 0.5)};
  EXPECT_NEAR(loss_dis_from_outputs(half, half).item(), 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(loss_adv_from_outputs(half).item(), std::log(2.0), 1e-12);
  EXPECT_EQ(loss_adv_from_outputs(half).item(), loss_dis_from_outputs(half, half).item() / 2);
  const std::vector<Tensor> src{Tensor({1, 2, 2}, kLogEps)}, trg{Tensor({1, 2, 2}, 1 - kLogEps)};
  EXPECT_NEAR(loss_dis_from_outputs(src, trg).item(), 2 * kLogEps, 1e-12);
  EXPECT_NEAR(loss_adv_from_outputs(src).item(), 0.0, 1e-6);
}

TEST(LossDis, MatchesScalarLoops) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = oracle::pick(rng, 1, 4), h = oracle::pick(rng, 1, 4), w = oracle::pick(rng, 1, 4);
    const auto src = random_d_outputs(m, h, w, rng), trg = random_d_outputs(m, h, w, rng);
    EXPECT_LT(std::abs(loss_dis_from_outputs(src, trg).item() - oracle::loss_dis(src, trg)), 1e-12);
    EXPECT_LT(std::abs(loss_adv_from_outputs(trg).item() - oracle::loss_adv(trg)), 1e-12);
  }
}

TEST(LossDis, RejectsEmptyBatch) {
  const std::vector<Tensor> none;
  const std::vector<Tensor> one{Tensor({1, 1, 1}, 0.5)};
  EXPECT_THROW(loss_dis_from_outputs(none, none), std::invalid_argument);
  EXPECT_THROW(loss_dis_from_outputs(one, none), std::invalid_argument);
  EXPECT_THROW(loss_adv_from_outputs(none), std::invalid_argument);
}

TEST(LossSeg, AnalyticValues) {
  const std::vector<FusedPrediction> uniform{{Tensor({3, 4, 4}, 1.0 / 3), 0}};
  const std::vector<LabelMap> labels{LabelMap(4, 4, 2)};
  EXPECT_NEAR(loss_seg(uniform, labels).item(), std::log(3.0), 1e-12);

  Tensor onehot({3, 2, 2});
  LabelMap gt(2, 2);
  for (std::size_t p = 0; p < 4; ++p) {
    gt.data[p] = static_cast<std::uint8_t>(p % 3);
    onehot.at((p % 3) * 4 + p) = 1;
  }
  const std::vector<FusedPrediction> perfect{{onehot, 0}};
  const std::vector<LabelMap> gts{gt};
  EXPECT_LE(loss_seg(perfect, gts).item(), -std::log(1 - kLogEps) + 1e-15);
}

TEST(LossSeg, IgnoredImageGivesZeroLossAndGradient) {
  Tensor p({3, 2, 2}, 1.0 / 3);
  p.set_requires_grad(true);
  const std::vector<FusedPrediction> preds{{p, 0}};
  const std::vector<LabelMap> labels{LabelMap(2, 2, kIgnoreIndex)};
  Tensor l = loss_seg(preds, labels);
  EXPECT_EQ(l.item(), 0.0);
  l.backward();
  for (Real g : p.grad()) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(loss_st(preds, labels).item(), 0.0);
}

TEST(LossSeg, IgnoredPixelsDoNotAffectLoss) {
  std::mt19937_64 rng(2);
  Tensor p = oracle::random_probs(3, 4, 4, rng);
  LabelMap labels = oracle::random_labels(3, 4, 4, rng, 0.5);
  labels.data[0] = kIgnoreIndex;
  const std::vector<LabelMap> lbl{labels};
  const Real before = loss_seg(std::vector<FusedPrediction>{{p, 0}}, lbl).item();
  Tensor q = p.clone();
  q.at(0) = 0.9;
  q.at(16) = 0.05;
  EXPECT_EQ(loss_seg(std::vector<FusedPrediction>{{q, 0}}, lbl).item(), before);
}

TEST(LossSeg, RejectsInvalidLabel) {
  const std::vector<FusedPrediction> preds{{Tensor({3, 1, 1}, 1.0 / 3), 0}};
  const std::vector<LabelMap> labels{LabelMap(1, 1, 3)};
  EXPECT_THROW(loss_seg(preds, labels), std::invalid_argument);
}

TEST(LossSt, ConfidentPseudoLabels) {
  Tensor p({3, 2, 2});
  LabelMap pseudo(2, 2);
  for (std::size_t px = 0; px < 4; ++px) {
    const std::size_t k = px % 3;
    for (std::size_t c = 0; c < 3; ++c) p.at(c * 4 + px) = c == k ? 0.9 : 0.05;
    pseudo.data[px] = static_cast<std::uint8_t>(k);
  }
  const std::vector<FusedPrediction> preds{{p, 0}};
  const std::vector<LabelMap> labels{pseudo};
  EXPECT_NEAR(loss_st(preds, labels).item(), -std::log(0.9), 1e-12);
}

TEST(LossSegSt, MatchScalarLoops) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<Real> ua(0, 1);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = oracle::pick(rng, 1, 3), n = oracle::pick(rng, 2, 5);
    const std::size_t h = oracle::pick(rng, 1, 5), w = oracle::pick(rng, 1, 5);
    std::vector<FusedPrediction> preds;
    std::vector<Tensor> fused;
    std::vector<LabelMap> labels;
    for (std::size_t i = 0; i < m; ++i) {
      const Real alpha = ua(rng);
      Tensor fl = oracle::random_probs(n, h, w, rng), fh = oracle::random_probs(n, h, w, rng);
      Tensor manual({n, h, w});
      for (std::size_t k = 0; k < manual.numel(); ++k) manual.at(k) = alpha * fl.at(k) + (1 - alpha) * fh.at(k);
      preds.push_back(fuse(fl, fh, alpha));
      fused.push_back(manual);
      labels.push_back(oracle::random_labels(n, h, w, rng, trial % 5 == 0 ? 1.0 : 0.3));
    }
    const Real ref = oracle::cross_entropy(fused, labels);
    EXPECT_LT(std::abs(loss_seg(preds, labels).item() - ref), 1e-12) << "trial " << trial;
    EXPECT_LT(std::abs(loss_st(preds, labels).item() - ref), 1e-12) << "trial " << trial;
  }
}

TEST(LossSsn, WeightedSum) {
  EXPECT_NEAR(loss_ssn(Tensor::scalar(0.69315), Tensor::scalar(1.0), 0.001).item(), 1.00069315, 1e-15);
  EXPECT_EQ(loss_ssn(Tensor::scalar(0.7), Tensor::scalar(1.25), 0).item(), 1.25);
  const Real without = loss_ssn(Tensor::scalar(0.7), Tensor::scalar(1.25), 0.001).item();
  const Real with = loss_ssn(Tensor::scalar(0.7), Tensor::scalar(1.25), 0.001, Tensor::scalar(0.5)).item();
  EXPECT_EQ(with - without, 0.5);
}

TEST(CrossEntropyIdentity, EqualDistributions) {
  const std::vector<Real> a{0.2, 0.3, 0.5};
  const auto r = ce_kl_identity_check(a, a);
  EXPECT_NEAR(r.kl, 0.0, 1e-15);
  EXPECT_EQ(r.cross_entropy, r.entropy);
  EXPECT_NEAR(r.residual, 0.0, 1e-15);
}

TEST(CrossEntropyIdentity, NearDegenerateAgainstUniform) {
  const std::vector<Real> a{1 - 1e-12, 1e-12}, b{0.5, 0.5};
  EXPECT_NEAR(ce_kl_identity_check(a, b).cross_entropy, std::log(2.0), 1e-9);
}

TEST(CrossEntropyIdentity, HoldsOnRandomPairs) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = oracle::pick(rng, 2, 10);
    const auto a = random_simplex(n, rng), b = random_simplex(n, rng);
    const auto r = ce_kl_identity_check(a, b);
    ASSERT_LT(std::abs(r.residual), 1e-9) << "trial " << trial;
    EXPECT_GE(r.kl, -1e-12);
  }
}

TEST(CrossEntropyIdentity, RejectsUnnormalizedInput) {
  const std::vector<Real> a{0.5, 0.6}, b{0.5, 0.5};
  EXPECT_THROW(ce_kl_identity_check(a, b), std::invalid_argument);
}
