#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "seatlab/label_map.hpp"
#include "seatlab/networks.hpp"
#include "seatlab/tensor.hpp"

namespace seatlab {

// Discriminator loss from D outputs (probability of "target") for each image
// of the batch: -(1/M) Σ_i [mean log(1 - D(src_i)) + mean log D(trg_i)].
Tensor loss_dis_from_outputs(std::span<const Tensor> d_source, std::span<const Tensor> d_target);
Tensor loss_dis(std::span<const FusedPrediction> source, std::span<const FusedPrediction> target,
                const DiscriminatorD& disc);

// Adversarial loss for G: -(1/M) Σ_i mean log(1 - D(trg_i)).
Tensor loss_adv_from_outputs(std::span<const Tensor> d_target);
Tensor loss_adv(std::span<const FusedPrediction> target, const DiscriminatorD& disc);

// Pixel-averaged cross-entropy of fused probabilities against a label map,
// then averaged over the batch. Ignored pixels contribute nothing.
Tensor loss_seg(std::span<const FusedPrediction> source, std::span<const LabelMap> labels,
                std::uint8_t ignore_index = kIgnoreIndex);
// Same contract over target predictions and pseudo-labels.
Tensor loss_st(std::span<const FusedPrediction> target, std::span<const LabelMap> pseudo,
               std::uint8_t ignore_index = kIgnoreIndex);

// beta·l_adv + l_seg (+ l_st in stage 2).
Tensor loss_ssn(const Tensor& l_adv, const Tensor& l_seg, Real beta, const std::optional<Tensor>& l_st = std::nullopt);

struct LossBundle {
  Real l_dis = 0;
  Real l_adv = 0;
  Real l_seg = 0;
  Real l_st = 0;
  Real l_ssn = 0;
  Real beta = 0.001;
};

struct CrossEntropyIdentity {
  Real cross_entropy;  // H(A, B)
  Real kl;             // KL(A || B)
  Real entropy;        // H(A, A)
  Real residual;       // H(A,B) - KL(A,B) - H(A,A)
};

// Evaluates both sides of H(A,B) = KL(A,B) + H(A,A) for two strictly
// positive distributions.
CrossEntropyIdentity ce_kl_identity_check(std::span<const Real> a, std::span<const Real> b);

}  // namespace seatlab
