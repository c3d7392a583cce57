#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "seatlab/losses.hpp"
#include "seatlab/metrics.hpp"
#include "seatlab/networks.hpp"
#include "seatlab/normalization.hpp"
#include "seatlab/optim.hpp"
#include "seatlab/synthdata.hpp"

namespace seatlab {

struct TrainConfig {
  Real alpha = 0.05;
  Real beta = 0.001;
  Real psi = 0.9;
  std::size_t max_iters = 3000;
  std::uint64_t seed = 1;
  int stage = 1;
  LayerSwitchSpec layer_switch;
  NormMode norm_mode = NormMode::seat;

  Real lr_g = 2.5e-4;
  Real lr_d = 1e-4;
  // Metrics are logged every eval_interval iterations and after the last one.
  std::size_t eval_interval = 250;

  std::size_t image_size = 64;
  std::size_t num_classes = 5;
  std::array<std::size_t, 4> widths{16, 32, 64, 64};
  std::size_t n_train_src = 500;
  std::size_t n_train_trg = 500;
  std::size_t n_eval_trg = 100;
  std::size_t n_eval_src = 100;
  std::uint64_t data_seed = 7;
  bool style_transfer = false;

  void validate() const;
  SegNetConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  SceneSpec scene_spec() const;
  SyntheticDataset make_dataset() const;
};

// Independent streams derived from the run seed.
std::uint64_t generator_init_seed(std::uint64_t seed);
std::uint64_t discriminator_init_seed(std::uint64_t seed);
std::uint64_t sampler_seed(std::uint64_t seed);

// Everything a run mutates: networks, optimizers, the index sampler and the
// iteration counter.
struct TrainingState {
  explicit TrainingState(const TrainConfig& config);

  SegNetG g;
  DiscriminatorD d;
  Sgd opt_g;
  Adam opt_d;
  std::mt19937_64 sampler;
  std::uint64_t iteration = 0;
};

struct TargetSample {
  const UnlabeledBatch* batch = nullptr;
  const LabelMap* pseudo = nullptr;  // required in stage 2
};

struct GeneratorPhaseResult {
  LossBundle losses;
  FusedPrediction source;  // detached
  FusedPrediction target;  // detached
};

// Forward both domains, backward β·l_adv + l_seg (+ l_st) and step G. D
// parameters are frozen for the duration.
GeneratorPhaseResult generator_phase(TrainingState& state, const DomainBatch& src, const TargetSample& trg,
                                     const TrainConfig& config);
// l_dis on detached fused maps and an Adam step on D. Returns l_dis.
Real discriminator_phase(TrainingState& state, const FusedPrediction& src, const FusedPrediction& trg);

// One G step followed by one D step using the optimizers' current learning
// rates. Gradients of both networks are cleared when it returns.
LossBundle train_step(TrainingState& state, const DomainBatch& src, const TargetSample& trg,
                      const TrainConfig& config);

struct MetricsRow {
  std::size_t iter = 0;
  Real lr_g = 0;
  Real lr_d = 0;
  Real l_seg = 0;
  Real l_adv = 0;
  Real l_dis = 0;
  Real l_st = 0;
  Real miou_target = 0;
};

std::string metrics_csv_header();
std::string to_csv(const MetricsRow& row);

using MetricsObserver = std::function<void(const MetricsRow&)>;

struct RunResult {
  std::unique_ptr<TrainingState> state;
  std::vector<MetricsRow> history;
};

// Trains from `state` (fresh when null) until cfg.max_iters. Losses in a row
// are averaged over the iterations since the previous row. Stage 2 needs one
// pseudo-label map per target-train image.
RunResult train_run(const TrainConfig& config, const SyntheticDataset& data,
                    std::span<const LabelMap> pseudo_labels = {}, std::unique_ptr<TrainingState> state = nullptr,
                    const MetricsObserver& observer = {});

// Fused, running-statistics prediction for one image.
FusedPrediction predict(SegNetG& g, const Tensor& image, Domain domain, Real alpha);

// mIoU over an evaluation split (target_eval or source_eval), forwarding with
// the split's domain tag unless `domain` overrides it.
MetricsReport evaluate_split(SegNetG& g, const SyntheticDataset& data, Split split, Real alpha,
                             const LayerSwitchSpec& layer_switch = {}, std::optional<Domain> domain = std::nullopt);

}  // namespace seatlab
