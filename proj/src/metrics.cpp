#include "seatlab/metrics.hpp"

#include <limits>
#include <stdexcept>

namespace seatlab {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::uint8_t ignore_index)
    : n_(num_classes), ignore_(ignore_index), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw std::invalid_argument("ConfusionMatrix: zero classes");
}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw std::invalid_argument("ConfusionMatrix: prediction and ground truth sizes differ");
  }
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const std::uint8_t g = gt.data[i];
    if (g == ignore_) continue;
    const std::uint8_t p = pred.data[i];
    if (g >= n_) throw std::invalid_argument("ConfusionMatrix: ground-truth class " + std::to_string(g) + " invalid");
    if (p >= n_) throw std::invalid_argument("ConfusionMatrix: predicted class " + std::to_string(p) + " invalid");
    ++counts_[g * n_ + p];
  }
}

MetricsReport ConfusionMatrix::report(const std::vector<bool>* class_mask) const {
  if (class_mask && class_mask->size() != n_) throw std::invalid_argument("ConfusionMatrix: class mask size");
  MetricsReport r;
  r.num_classes = n_;
  r.confusion = counts_;
  r.iou.assign(n_, std::numeric_limits<Real>::quiet_NaN());
  r.evaluated.assign(n_, false);
  Real total = 0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < n_; ++c) {
    std::uint64_t tp = counts_[c * n_ + c], fp = 0, fn = 0;
    for (std::size_t k = 0; k < n_; ++k) {
      if (k == c) continue;
      fp += counts_[k * n_ + c];
      fn += counts_[c * n_ + k];
    }
    const std::uint64_t uni = tp + fp + fn;
    if (uni == 0) continue;
    r.iou[c] = static_cast<Real>(tp) / static_cast<Real>(uni);
    if (class_mask && !(*class_mask)[c]) continue;
    r.evaluated[c] = true;
    total += r.iou[c];
    ++used;
  }
  r.miou = used ? total / static_cast<Real>(used) : Real{0};
  return r;
}

MetricsReport miou(std::span<const LabelMap> preds, std::span<const LabelMap> gts, std::size_t num_classes,
                   std::uint8_t ignore_index, const std::vector<bool>* class_mask) {
  if (preds.size() != gts.size()) throw std::invalid_argument("miou: prediction/ground-truth count mismatch");
  ConfusionMatrix cm(num_classes, ignore_index);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(preds[i], gts[i]);
  return cm.report(class_mask);
}

LabelMap argmax_map(const Tensor& probs) {
  if (probs.rank() != 3) throw std::invalid_argument("argmax_map: expected N×H×W");
  const std::size_t n = probs.dim(0), h = probs.dim(1), w = probs.dim(2);
  if (n > kIgnoreIndex) throw std::invalid_argument("argmax_map: too many classes");
  const auto d = probs.data();
  LabelMap out(h, w);
  for (std::size_t p = 0; p < h * w; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < n; ++c) {
      if (d[c * h * w + p] > d[best * h * w + p]) best = c;
    }
    out.data[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace seatlab
