#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "seatlab/training.hpp"

namespace seatlab {

struct PseudoLabelMap {
  LabelMap labels;
  Real coverage = 0;  // fraction of pixels not set to 255
  Real psi = 0;
};

// Per pixel, the argmax class κ (lowest index on ties) where φ[κ] ≥ psi,
// otherwise kIgnoreIndex. `probs` is N×H×W.
PseudoLabelMap pseudo_label_from_probs(const Tensor& probs, Real psi);

// One map per target-train image from running-statistics, target-tagged,
// fused predictions.
std::vector<PseudoLabelMap> gen_pseudo_labels(SegNetG& g, const SyntheticDataset& data, Real psi, Real alpha);

Real mean_coverage(const std::vector<PseudoLabelMap>& maps);

// target_train_<i>.pgm per map plus manifest.txt. Image paths in the
// manifest follow the export_dataset layout.
void write_pseudo_labels(const std::filesystem::path& dir, const std::vector<PseudoLabelMap>& maps);
std::vector<LabelMap> read_pseudo_labels(const std::filesystem::path& dir);

struct PipelineResult {
  RunResult stage1;
  std::vector<PseudoLabelMap> pseudo;
  RunResult stage2;
  Real stage1_miou = 0;
  Real stage2_miou = 0;
  Real coverage = 0;
};

// Stage 1 (unless a trained stage-1 state is passed in), pseudo-labels at
// cfg.psi, then stage 2 from a fresh G and D initialised with the same seeds,
// trained on β·l_adv + l_seg + l_st. cfg.stage is ignored.
PipelineResult two_stage_pipeline(const TrainConfig& config, const SyntheticDataset& data,
                                  std::unique_ptr<TrainingState> stage1 = nullptr,
                                  const MetricsObserver& stage1_observer = {},
                                  const MetricsObserver& stage2_observer = {});

}  // namespace seatlab
