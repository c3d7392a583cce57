#include <gtest/gtest.h>

#include <algorithm>
#include <string>

#include "seatlab/grad_check.hpp"
#include "seatlab/grad_suite.hpp"
#include "seatlab/ops.hpp"

using namespace seatlab;

TEST(GradCheck, LinearFunctionIsExact) {
  Tensor x({6}, {0.1, -2, 3.5, 4, -0.7, 1});
  Tensor w({6}, {1.5, -0.5, 2, 0.25, 3, -1});
  const auto r = grad_check([&](const Tensor& v) { return sum(mul(v, w)); }, x);
  EXPECT_EQ(r.checked, 6u);
  EXPECT_LT(r.max_rel_error, 1e-10);
}

TEST(GradCheck, SkipsCoordinatesOnTheLogClamp) {
  Tensor x({3}, {1e-7, 0.5, 2});
  const auto r = grad_check([](const Tensor& v) { return sum(log(v)); }, x);
  EXPECT_EQ(r.skipped_nondifferentiable, 1u);
  EXPECT_EQ(r.checked, 2u);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, RejectsNonScalarFunction) {
  EXPECT_THROW(grad_check([](const Tensor& v) { return mul(v, v); }, Tensor({2}, 1.0)), std::invalid_argument);
}

TEST(GradCheck, SampledCoordinates) {
  Tensor x({50}, 0.3);
  GradCheckOptions opt;
  opt.max_coords = 7;
  const auto r = grad_check([](const Tensor& v) { return sum(mul(v, v)); }, x, opt);
  EXPECT_EQ(r.checked, 7u);
}

class GradientSuite : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GradientSuite, PassesOnTwentySeeds) {
  const GradSuiteCase& c = gradient_suite()[GetParam()];
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GradCheckResult r = c.run(seed);
    EXPECT_GT(r.checked, 0u) << c.name << " seed " << seed;
    EXPECT_LT(r.max_rel_error, 1e-4) << c.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllCases, GradientSuite, ::testing::Range<std::size_t>(0, gradient_suite().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                           std::string name = gradient_suite()[info.param].name;
                           std::replace_if(name.begin(), name.end(), [](char ch) { return !std::isalnum(ch); }, '_');
                           return name;
                         });

TEST(GradientSuiteCoverage, NamesEveryComponent) {
  std::vector<std::string> names;
  for (const auto& c : gradient_suite()) names.push_back(c.name);
  for (const char* required : {"conv2d.input", "softmax_channels", "bilinear_upsample", "batch_norm.input",
                               "loss_seg", "loss_st", "loss_adv.prediction", "loss_dis.discriminator", "loss_ssn",
                               "generator.image"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), required), names.end()) << required;
  }
}
