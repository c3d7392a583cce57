#include "seatlab/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace seatlab {

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, const GradCheckOptions& options) {
  const bool had_grad_flag = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();

  Tensor y = f(x);
  if (y.numel() != 1) {
    throw std::invalid_argument("grad_check: function must be scalar-valued, got shape " + shape_to_string(y.shape()));
  }
  const Real f0 = y.item();
  y.backward();
  const std::vector<Real> analytic(x.grad().begin(), x.grad().end());

  std::vector<std::size_t> coords(x.numel());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coords != 0 && options.max_coords < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  // Perturbations are evaluated without recording a graph.
  x.set_requires_grad(false);
  auto eval_at = [&](std::size_t i, Real value) {
    const Real saved = x.data()[i];
    x.data()[i] = value;
    const Real out = f(x).item();
    x.data()[i] = saved;
    return out;
  };

  GradCheckResult result;
  const Real eps = options.eps;
  for (std::size_t i : coords) {
    const Real xi = x.data()[i];
    const Real fp = eval_at(i, xi + eps);
    const Real fm = eval_at(i, xi - eps);
    const Real numeric = (fp - fm) / (2 * eps);
    const Real right = (fp - f0) / eps;
    const Real left = (f0 - fm) / eps;
    if (std::abs(right - left) > options.kink_tolerance * std::max(Real{1}, std::abs(numeric))) {
      ++result.skipped_nondifferentiable;
      continue;
    }
    const Real err = std::abs(analytic[i] - numeric) / std::max(Real{1}, std::abs(numeric));
    result.max_rel_error = std::max(result.max_rel_error, err);
    ++result.checked;
  }
  x.set_requires_grad(had_grad_flag);
  return result;
}

}  // namespace seatlab
