#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "scratch.hpp"
#include "seatlab/metrics.hpp"
#include "seatlab/selftrain.hpp"

using namespace seatlab;

namespace {

Tensor pixel(std::vector<Real> probs) {
  const std::size_t n = probs.size();
  return Tensor({n, 1, 1}, std::move(probs));
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.image_size = 16;
  cfg.widths = {4, 4, 4, 4};
  cfg.n_train_src = 3;
  cfg.n_train_trg = 3;
  cfg.n_eval_trg = 2;
  cfg.n_eval_src = 2;
  cfg.max_iters = 4;
  cfg.eval_interval = 4;
  cfg.lr_g = 1e-3;
  return cfg;
}

}  // namespace

TEST(PseudoLabel, Examples) {
  EXPECT_EQ(pseudo_label_from_probs(pixel({0.95, 0.03, 0.02}), 0.9).labels.data[0], 0);
  const auto low = pseudo_label_from_probs(pixel({0.8, 0.1, 0.1}), 0.9);
  EXPECT_EQ(low.labels.data[0], kIgnoreIndex);
  EXPECT_EQ(low.coverage, 0.0);
  EXPECT_EQ(pseudo_label_from_probs(pixel({0.4, 0.4, 0.2}), 0.3).labels.data[0], 0);
  EXPECT_EQ(pseudo_label_from_probs(pixel({0.9, 0.1}), 0.9).labels.data[0], 0);
  EXPECT_THROW(pseudo_label_from_probs(pixel({0.5, 0.5}), 1.1), std::invalid_argument);
  EXPECT_THROW(pseudo_label_from_probs(pixel({0.5, 0.5}), -0.1), std::invalid_argument);
}

TEST(PseudoLabel, ZeroThresholdLabelsEveryPixel) {
  std::mt19937_64 rng(1);
  Tensor p = oracle::random_probs(4, 6, 5, rng);
  const auto m = pseudo_label_from_probs(p, 0);
  EXPECT_EQ(m.coverage, 1.0);
  EXPECT_EQ(m.labels, argmax_map(p));
}

TEST(PseudoLabel, CoverageMonotoneAndLabelsAreArgmax) {
  std::mt19937_64 rng(2);
  const std::vector<Real> psis{0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 1};
  for (int trial = 0; trial < 50; ++trial) {
    Tensor p = softmax_channels(oracle::randn({5, 8, 8}, rng, 2));
    const LabelMap am = argmax_map(p);
    Real previous = 2;
    LabelMap previous_labels;
    for (Real psi : psis) {
      const auto m = pseudo_label_from_probs(p, psi);
      EXPECT_LE(m.coverage, previous);
      EXPECT_GE(m.coverage, 0);
      for (std::size_t px = 0; px < 64; ++px) {
        if (m.labels.data[px] == kIgnoreIndex) continue;
        EXPECT_EQ(m.labels.data[px], am.data[px]);
        EXPECT_GE(p.at(am.data[px] * 64 + px), psi);
        if (!previous_labels.data.empty()) {
          EXPECT_NE(previous_labels.data[px], kIgnoreIndex);
        }
      }
      previous = m.coverage;
      previous_labels = m.labels;
    }
  }
}

TEST(PseudoLabel, WriteReadRoundTrip) {
  const auto dir = scratch_dir();
  std::mt19937_64 rng(3);
  std::vector<PseudoLabelMap> maps;
  for (int i = 0; i < 3; ++i) maps.push_back(pseudo_label_from_probs(oracle::random_probs(3, 4, 5, rng), 0.5));
  write_pseudo_labels(dir, maps);
  const auto back = read_pseudo_labels(dir);
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(back[i], maps[i].labels);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.txt"));
  EXPECT_EQ(mean_coverage(maps), (maps[0].coverage + maps[1].coverage + maps[2].coverage) / 3);
}

TEST(PseudoLabel, GenerationIsDeterministic) {
  TrainConfig cfg = tiny_config();
  const auto data = cfg.make_dataset();
  TrainingState state(cfg);
  const auto a = gen_pseudo_labels(state.g, data, 0.5, cfg.alpha);
  const auto b = gen_pseudo_labels(state.g, data, 0.5, cfg.alpha);
  ASSERT_EQ(a.size(), cfg.n_train_trg);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].labels, b[i].labels);
  const auto strict = gen_pseudo_labels(state.g, data, 0.9, cfg.alpha);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(strict[i].coverage, a[i].coverage);
}

TEST(TwoStagePipeline, RunsBothStages) {
  TrainConfig cfg = tiny_config();
  cfg.psi = 0.3;
  const auto data = cfg.make_dataset();
  const PipelineResult r = two_stage_pipeline(cfg, data);
  EXPECT_EQ(r.stage1.state->iteration, cfg.max_iters);
  EXPECT_EQ(r.stage2.state->iteration, cfg.max_iters);
  EXPECT_EQ(r.pseudo.size(), cfg.n_train_trg);
  EXPECT_EQ(r.coverage, mean_coverage(r.pseudo));
  EXPECT_EQ(r.stage1_miou, r.stage1.history.back().miou_target);
  EXPECT_EQ(r.stage2_miou, r.stage2.history.back().miou_target);
  EXPECT_GT(r.stage2.history.back().l_st, 0);
}

TEST(TwoStagePipeline, FullThresholdLeavesNoSelfTrainingSignal) {
  TrainConfig cfg = tiny_config();
  cfg.psi = 1.0;
  const auto data = cfg.make_dataset();
  const PipelineResult r = two_stage_pipeline(cfg, data);
  EXPECT_LT(r.coverage, 0.01);
  EXPECT_LT(r.stage2.history.back().l_st, 0.05);
}

TEST(TwoStagePipeline, RejectsUnfinishedStageOne) {
  TrainConfig cfg = tiny_config();
  const auto data = cfg.make_dataset();
  EXPECT_THROW(two_stage_pipeline(cfg, data, std::make_unique<TrainingState>(cfg)), std::invalid_argument);
}
