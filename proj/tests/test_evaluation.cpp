#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "seatlab/evaluation.hpp"

using namespace seatlab;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.image_size = 16;
  cfg.widths = {4, 4, 4, 4};
  cfg.n_train_src = 4;
  cfg.n_train_trg = 4;
  cfg.n_eval_trg = 3;
  cfg.n_eval_src = 3;
  cfg.max_iters = 8;
  cfg.eval_interval = 8;
  cfg.lr_g = 5e-3;
  return cfg;
}

std::uint64_t total(const FeatureHistogram& h) { return std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0}); }

}  // namespace

TEST(FeatureHistogram, Binning) {
  EXPECT_EQ(FeatureHistogram::bin_of(-100), 0u);
  EXPECT_EQ(FeatureHistogram::bin_of(-5), 0u);
  EXPECT_EQ(FeatureHistogram::bin_of(0), 40u);
  EXPECT_EQ(FeatureHistogram::bin_of(4.99), 79u);
  EXPECT_EQ(FeatureHistogram::bin_of(5), 79u);
  EXPECT_EQ(FeatureHistogram::bin_of(1e9), 79u);
  EXPECT_DOUBLE_EQ(FeatureHistogram::bin_left(40), 0.0);
  FeatureHistogram h;
  const std::vector<Real> v{0, 0.1, -7, 7};
  h.add(v);
  EXPECT_EQ(h.samples, 4u);
  EXPECT_EQ(total(h), 4u);
  EXPECT_EQ(histogram_l1(h, h), 0.0);
}

TEST(FeatureHistogram, ZeroImageLandsInZeroBin) {
  SegNetConfig cfg;
  cfg.num_classes = 3;
  cfg.height = cfg.width = 16;
  cfg.widths = {4, 4, 4, 4};
  SegNetG g(cfg, 1);
  const std::vector<Tensor> imgs{Tensor({3, 16, 16}, 0.0)};
  const auto hists = collect_feature_histograms(g, imgs, imgs, {"layer1.block0.norm"});
  ASSERT_EQ(hists.size(), 2u);
  for (const auto& h : hists) {
    EXPECT_EQ(h.counts[FeatureHistogram::bin_of(0)], h.samples);
    EXPECT_EQ(h.samples, 4u * 16 * 16);
  }
  EXPECT_EQ(hists[0].domain, Domain::source);
  EXPECT_EQ(hists[1].domain, Domain::target);
}

TEST(FeatureHistogram, CountsAreConserved) {
  const TrainConfig cfg = tiny_config();
  const auto data = cfg.make_dataset();
  TrainingState state(cfg);
  const auto before = state.g.named_state();
  std::vector<std::vector<Real>> snap;
  for (const auto& [n, t] : before) snap.emplace_back(t.data().begin(), t.data().end());

  const std::vector<std::string> layers{"layer1", "layer4.block1.norm"};
  const auto hists = collect_feature_histograms(state.g, data, 3, layers);
  ASSERT_EQ(hists.size(), 4u);
  const std::size_t layer1 = 2 * 4 * 16 * 16;
  const std::size_t block = 4 * 2 * 2;
  EXPECT_EQ(hists[0].samples, 3 * layer1);
  EXPECT_EQ(hists[1].samples, 3 * block);
  for (const auto& h : hists) EXPECT_EQ(total(h), h.samples);

  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& t = state.g.named_state()[i].second;
    EXPECT_EQ(std::vector<Real>(t.data().begin(), t.data().end()), snap[i]) << before[i].first;
  }
}

TEST(FeatureHistogram, RejectsUnknownOrRepeatedLayers) {
  const TrainConfig cfg = tiny_config();
  const auto data = cfg.make_dataset();
  TrainingState state(cfg);
  EXPECT_THROW(collect_feature_histograms(state.g, data, 1, {"layer7"}), std::invalid_argument);
  EXPECT_THROW(collect_feature_histograms(state.g, data, 1, {"layer1", "layer1.block1.norm"}), std::invalid_argument);
  EXPECT_THROW(collect_feature_histograms(state.g, data, 99, {"layer1"}), std::invalid_argument);
}

TEST(FeatureHistogram, CsvFormat) {
  FeatureHistogram h;
  h.layer = "layer2";
  h.domain = Domain::target;
  h.counts[3] = 5;
  std::ostringstream out;
  write_histograms_csv(out, {h});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "layer,domain,bin_left,count");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.rfind("layer2,target,", 0), 0u) << line;
  }
  EXPECT_EQ(rows, FeatureHistogram::kBins);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(SweepAlpha, StubRunner) {
  std::vector<std::pair<Real, std::uint64_t>> calls;
  const TrialRunner runner = [&](const TrainConfig& c) {
    calls.emplace_back(c.alpha, c.seed);
    return c.alpha + 0.01 * static_cast<Real>(c.seed);
  };
  const AlphaSweep s = sweep_alpha(TrainConfig{}, {0, 0.05, 0.4}, {1, 2, 3}, runner);
  EXPECT_EQ(calls.size(), 9u);
  ASSERT_EQ(s.median_miou.size(), 3u);
  EXPECT_DOUBLE_EQ(s.median_miou[1], 0.05 + 0.02);
  EXPECT_EQ(s.range[0], 0.0);
  EXPECT_DOUBLE_EQ(s.range[2], 0.4);
  EXPECT_EQ(s.miou[2][0], 0.4 + 0.01);

  std::ostringstream out;
  write_alpha_sweep_csv(out, s);
  EXPECT_EQ(out.str(), "alpha,0,0.05,0.4\nmIoU,0.020000,0.070000,0.420000\nrange,+0.000000,+0.050000,+0.400000\n");
  EXPECT_THROW(sweep_alpha(TrainConfig{}, {1.2}, {1}, runner), std::invalid_argument);
}

TEST(SweepAlpha, NoRangeWithoutZero) {
  const AlphaSweep s = sweep_alpha(TrainConfig{}, {0.1}, {1}, [](const TrainConfig&) { return 0.5; });
  EXPECT_TRUE(s.range.empty());
}

class TrainedSeat : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new TrainConfig(tiny_config());
    data_ = new SyntheticDataset(cfg_->make_dataset());
    run_ = new RunResult(train_run(*cfg_, *data_));
  }
  static void TearDownTestSuite() {
    delete run_;
    delete data_;
    delete cfg_;
  }
  static TrainConfig* cfg_;
  static SyntheticDataset* data_;
  static RunResult* run_;
};

TrainConfig* TrainedSeat::cfg_ = nullptr;
SyntheticDataset* TrainedSeat::data_ = nullptr;
RunResult* TrainedSeat::run_ = nullptr;

TEST_F(TrainedSeat, DomainsHaveDiverged) {
  SegNetG& g = run_->state->g;
  const auto img = data_->target_eval(0).image;
  const auto t = predict(g, img, Domain::target, cfg_->alpha);
  const auto s = predict(g, img, Domain::source, cfg_->alpha);
  Real diff = 0;
  for (std::size_t i = 0; i < t.probs.numel(); ++i) diff = std::max(diff, std::abs(t.probs.at(i) - s.probs.at(i)));
  EXPECT_GT(diff, 1e-6);
}

TEST_F(TrainedSeat, FullRangeSwitchEqualsSourceTaggedForward) {
  SegNetG& g = run_->state->g;
  for (std::size_t i = 0; i < data_->size(Split::target_eval); ++i) {
    const auto img = data_->target_eval(i).image;
    const auto ref = predict(g, img, Domain::source, cfg_->alpha);
    ScopedLayerSwitch sw(g, LayerSwitchSpec::parse("1-4"));
    const auto switched = predict(g, img, Domain::target, cfg_->alpha);
    for (std::size_t k = 0; k < ref.probs.numel(); ++k) ASSERT_LT(std::abs(ref.probs.at(k) - switched.probs.at(k)), 1e-9);
  }
  const Real a = evaluate_split(g, *data_, Split::target_eval, cfg_->alpha, LayerSwitchSpec::parse("1-4")).miou;
  const Real b = evaluate_split(g, *data_, Split::target_eval, cfg_->alpha, {}, Domain::source).miou;
  EXPECT_LT(std::abs(a - b), 1e-9);
}

TEST_F(TrainedSeat, SwitchSweepTable) {
  SegNetG& g = run_->state->g;
  const auto specs = default_switch_specs();
  ASSERT_EQ(specs.size(), 5u);
  const auto results = sweep_layer_switch(g, *data_, specs, cfg_->alpha);
  EXPECT_EQ(results[0].miou, evaluate_split(g, *data_, Split::target_eval, cfg_->alpha).miou);
  for (const auto& layer : g.norm_layer_names()) EXPECT_FALSE(g.find_norm(layer)->switch_to_source());

  std::ostringstream out;
  write_switch_sweep_csv(out, results);
  std::istringstream in(out.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "switch,mIoU");
  EXPECT_EQ(lines[1].rfind("none,", 0), 0u);
  EXPECT_EQ(lines[2].rfind("4-4,", 0), 0u);
  EXPECT_EQ(lines[5].rfind("1-4,", 0), 0u);
  EXPECT_THROW(sweep_layer_switch(g, *data_, {LayerSwitchSpec::parse("0-4")}, cfg_->alpha), std::out_of_range);
}

TEST(Colorize, IgnoreIsBlack) {
  LabelMap m(1, 2);
  m.data = {kIgnoreIndex, 1};
  const Tensor c = colorize(m);
  ASSERT_EQ(c.shape(), (Shape{3, 1, 2}));
  for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(c.at(ch * 2), 0.0);
  EXPECT_GT(c.at(1) + c.at(3) + c.at(5), 0.0);
}
