#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seatlab/tensor.hpp"

namespace seatlab {

// Lower clamp applied inside every log.
inline constexpr Real kLogEps = 1e-7;

// --- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& x, Real factor);
// scale * x + shift
Tensor affine(const Tensor& x, Real scale, Real shift);
// log(max(x, clamp_eps)); zero gradient where x <= clamp_eps.
Tensor log(const Tensor& x, Real clamp_eps = kLogEps);
Tensor leaky_relu(const Tensor& x, Real slope);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// Zero gradient outside [lo, hi].
Tensor clamp(const Tensor& x, Real lo, Real hi);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// --- image ops (C×H×W, no batch axis) ---------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// Channel softmax of an N×H×W map, with per-pixel max subtraction.
Tensor softmax_channels(const Tensor& logits);

// Bilinear resize with the align_corners=false convention; only upsampling.
Tensor bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w);

// Mean over labelled pixels of x[label(p), p] for an N×H×W map. Pixels whose
// label equals ignore_index are skipped; with no labelled pixel the result is
// 0 and the gradient is zero.
Tensor select_mean(const Tensor& x, std::span<const std::uint8_t> labels, std::uint8_t ignore_index);

// --- batch normalization ----------------------------------------------------

struct BatchNormStats {
  std::vector<Real> mean;
  std::vector<Real> var;  // biased batch variance
};

// Normalizes C×H×W or B×C×H×W input per channel and applies gamma/beta.
// When `fixed` is null the statistics are computed from the input (over the
// batch and spatial axes) and reported through `batch_stats`; otherwise the
// given statistics are treated as constants. `pre_affine`, when set, receives
// the normalized values before the affine step.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps,
                  const BatchNormStats* fixed, BatchNormStats* batch_stats = nullptr,
                  std::vector<Real>* pre_affine = nullptr);

}  // namespace seatlab
