#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "seatlab/training.hpp"

namespace seatlab {

// --- Feature distributions -----------------------------------------------------

struct FeatureHistogram {
  static constexpr std::size_t kBins = 80;
  static constexpr Real kLow = -5;
  static constexpr Real kHigh = 5;

  std::string layer;
  Domain domain = Domain::source;
  std::vector<std::uint64_t> counts = std::vector<std::uint64_t>(kBins, 0);
  std::uint64_t samples = 0;

  static Real bin_width() { return (kHigh - kLow) / static_cast<Real>(kBins); }
  static Real bin_left(std::size_t bin) { return kLow + bin_width() * static_cast<Real>(bin); }
  // Values outside [kLow, kHigh) land in the edge bins.
  static std::size_t bin_of(Real value);
  void add(std::span<const Real> values);
};

// L1 distance between the normalised bin frequencies of two histograms.
Real histogram_l1(const FeatureHistogram& a, const FeatureHistogram& b);

// Histograms of normalized, pre-affine activations, one per (layer, domain).
// A layer is a norm-layer name ("layer4.block1.norm") or a group name
// ("layer4", pooling its norm layers). Forwards use batch statistics without
// touching the running statistics.
std::vector<FeatureHistogram> collect_feature_histograms(SegNetG& g, std::span<const Tensor> source_images,
                                                         std::span<const Tensor> target_images,
                                                         const std::vector<std::string>& layers);
// Uses the first `batches` images of the source-train and target-train splits.
std::vector<FeatureHistogram> collect_feature_histograms(SegNetG& g, const SyntheticDataset& data,
                                                         std::size_t batches, const std::vector<std::string>& layers);

// Header "layer,domain,bin_left,count".
void write_histograms_csv(std::ostream& out, const std::vector<FeatureHistogram>& hists);

// --- Sweeps -----------------------------------------------------------------------

// Trains one configuration and returns its target mIoU.
using TrialRunner = std::function<Real(const TrainConfig&)>;
Real train_and_evaluate(const TrainConfig& config);

Real median(std::vector<Real> values);

struct AlphaSweep {
  std::vector<Real> alphas;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<Real>> miou;  // [alpha][seed]
  std::vector<Real> median_miou;
  // median_miou[i] - median_miou at alpha 0 (empty when 0 is not swept).
  std::vector<Real> range;
};

// One run per (alpha, seed) with everything else taken from `base`.
AlphaSweep sweep_alpha(const TrainConfig& base, const std::vector<Real>& alphas, const std::vector<std::uint64_t>& seeds,
                       const TrialRunner& runner = train_and_evaluate);
// Transposed table: rows "alpha", "mIoU", "range".
void write_alpha_sweep_csv(std::ostream& out, const AlphaSweep& sweep);

struct SwitchResult {
  LayerSwitchSpec spec;
  Real miou = 0;
};

std::vector<LayerSwitchSpec> default_switch_specs();
std::vector<SwitchResult> sweep_layer_switch(SegNetG& g, const SyntheticDataset& data,
                                             const std::vector<LayerSwitchSpec>& specs, Real alpha);
// Header "switch,mIoU"; the empty spec is written as "none".
void write_switch_sweep_csv(std::ostream& out, const std::vector<SwitchResult>& results);

// --- Visualisation ----------------------------------------------------------------

// 3×H×W colour image; ignore pixels are black.
Tensor colorize(const LabelMap& labels);
// Image, prediction and ground truth side by side in one PPM.
void write_prediction_ppm(const std::filesystem::path& path, const Tensor& image, const LabelMap& prediction,
                          const LabelMap& ground_truth);

}  // namespace seatlab
