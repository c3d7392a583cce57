#pragma once

#include <cstdint>
#include <functional>

#include "seatlab/tensor.hpp"

namespace seatlab {

struct GradCheckOptions {
  Real eps = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample of this many.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  // One-sided differences that disagree by more than this (relative) mark a
  // coordinate as sitting on a kink; such coordinates are skipped.
  Real kink_tolerance = 1e-2;
};

struct GradCheckResult {
  Real max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped_nondifferentiable = 0;
};

// Compares the reverse-mode gradient of a scalar function against central
// differences (f(x+eps) - f(x-eps)) / (2 eps). The error per coordinate is
// |analytic - numeric| / max(1, |numeric|).
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                           const GradCheckOptions& options = {});

}  // namespace seatlab
