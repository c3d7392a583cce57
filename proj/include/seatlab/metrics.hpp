#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seatlab/label_map.hpp"
#include "seatlab/tensor.hpp"

namespace seatlab {

struct MetricsReport {
  std::size_t num_classes = 0;
  // Row = ground truth, column = prediction; ignored pixels excluded.
  std::vector<std::uint64_t> confusion;
  // IoU per class; NaN for classes absent from both prediction and GT.
  std::vector<Real> iou;
  // Classes that entered the mean.
  std::vector<bool> evaluated;
  Real miou = 0;
  std::string config_fingerprint;
  std::uint64_t seed = 0;

  std::uint64_t count(std::size_t gt, std::size_t pred) const { return confusion[gt * num_classes + pred]; }
};

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes, std::uint8_t ignore_index = kIgnoreIndex);

  void add(const LabelMap& pred, const LabelMap& gt);
  // IoU_c = TP / (TP + FP + FN); classes with an empty union are excluded, as
  // are classes outside `class_mask` when one is given.
  MetricsReport report(const std::vector<bool>* class_mask = nullptr) const;

 private:
  std::size_t n_;
  std::uint8_t ignore_;
  std::vector<std::uint64_t> counts_;
};

MetricsReport miou(std::span<const LabelMap> preds, std::span<const LabelMap> gts, std::size_t num_classes,
                   std::uint8_t ignore_index = kIgnoreIndex, const std::vector<bool>* class_mask = nullptr);

// Per-pixel argmax over channels of an N×H×W map; ties go to the lowest index.
LabelMap argmax_map(const Tensor& probs);

}  // namespace seatlab
