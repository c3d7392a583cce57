#include "seatlab/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "seatlab/ops.hpp"

namespace seatlab {

void validate_labels(const LabelMap& labels, std::size_t num_classes) {
  for (std::uint8_t v : labels.data) {
    if (v != kIgnoreIndex && v >= num_classes) {
      throw std::invalid_argument("label " + std::to_string(v) + " is not a class id below " +
                                  std::to_string(num_classes) + " nor the ignore index");
    }
  }
}

namespace {

Tensor batch_mean(std::vector<Tensor> terms, Real sign) {
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return scalar_mul(total, sign / static_cast<Real>(terms.size()));
}

Tensor cross_entropy(std::span<const FusedPrediction> preds, std::span<const LabelMap> labels,
                     std::uint8_t ignore_index, const char* what) {
  if (preds.empty()) throw std::invalid_argument(std::string(what) + ": empty batch");
  if (preds.size() != labels.size()) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(preds.size()) + " predictions but " +
                                std::to_string(labels.size()) + " label maps");
  }
  std::vector<Tensor> terms;
  terms.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Tensor& p = preds[i].probs;
    if (labels[i].height != p.dim(1) || labels[i].width != p.dim(2)) {
      throw std::invalid_argument(std::string(what) + ": label map size does not match prediction");
    }
    validate_labels(labels[i], p.dim(0));
    terms.push_back(select_mean(log(p), labels[i].data, ignore_index));
  }
  return batch_mean(std::move(terms), -1);
}

}  // namespace

Tensor loss_dis_from_outputs(std::span<const Tensor> d_source, std::span<const Tensor> d_target) {
  if (d_source.empty() || d_target.empty()) throw std::invalid_argument("loss_dis: empty batch");
  if (d_source.size() != d_target.size()) throw std::invalid_argument("loss_dis: source/target batch size differ");
  std::vector<Tensor> terms;
  for (std::size_t i = 0; i < d_source.size(); ++i) {
    terms.push_back(add(mean(log(affine(d_source[i], -1, 1))), mean(log(d_target[i]))));
  }
  return batch_mean(std::move(terms), -1);
}

Tensor loss_dis(std::span<const FusedPrediction> source, std::span<const FusedPrediction> target,
                const DiscriminatorD& disc) {
  std::vector<Tensor> ds, dt;
  for (const auto& s : source) ds.push_back(disc.forward(s.probs));
  for (const auto& t : target) dt.push_back(disc.forward(t.probs));
  return loss_dis_from_outputs(ds, dt);
}

Tensor loss_adv_from_outputs(std::span<const Tensor> d_target) {
  if (d_target.empty()) throw std::invalid_argument("loss_adv: empty batch");
  std::vector<Tensor> terms;
  for (const Tensor& d : d_target) terms.push_back(mean(log(affine(d, -1, 1))));
  return batch_mean(std::move(terms), -1);
}

Tensor loss_adv(std::span<const FusedPrediction> target, const DiscriminatorD& disc) {
  std::vector<Tensor> dt;
  for (const auto& t : target) dt.push_back(disc.forward(t.probs));
  return loss_adv_from_outputs(dt);
}

Tensor loss_seg(std::span<const FusedPrediction> source, std::span<const LabelMap> labels,
                std::uint8_t ignore_index) {
  return cross_entropy(source, labels, ignore_index, "loss_seg");
}

Tensor loss_st(std::span<const FusedPrediction> target, std::span<const LabelMap> pseudo, std::uint8_t ignore_index) {
  return cross_entropy(target, pseudo, ignore_index, "loss_st");
}

Tensor loss_ssn(const Tensor& l_adv, const Tensor& l_seg, Real beta, const std::optional<Tensor>& l_st) {
  if (beta < 0) throw std::invalid_argument("loss_ssn: beta must be non-negative");
  Tensor total = add(scalar_mul(l_adv, beta), l_seg);
  if (l_st) total = add(total, *l_st);
  return total;
}

CrossEntropyIdentity ce_kl_identity_check(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("ce_kl_identity_check: size mismatch");
  Real sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0) || !(b[i] > 0)) throw std::invalid_argument("ce_kl_identity_check: entries must be positive");
    sa += a[i];
    sb += b[i];
  }
  if (std::abs(sa - 1) > 1e-9 || std::abs(sb - 1) > 1e-9) {
    throw std::invalid_argument("ce_kl_identity_check: distributions must sum to 1");
  }
  CrossEntropyIdentity r{0, 0, 0, 0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real la = std::log(a[i]);
    const Real lb = std::log(b[i]);
    r.cross_entropy -= a[i] * lb;
    r.kl += a[i] * la - a[i] * lb;
    r.entropy -= a[i] * la;
  }
  r.residual = r.cross_entropy - r.kl - r.entropy;
  return r;
}

}  // namespace seatlab
