#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seatlab/networks.hpp"

namespace seatlab {

// base_lr · (1 − iter/max_iter)^power
Real poly_lr(std::size_t iter, std::size_t max_iter, Real base_lr, Real power = 0.9);

// SGD with momentum and L2 weight decay folded into the gradient:
//   buf ← momentum·buf + (g + wd·p);  p ← p − lr·buf
// Parameters without an accumulated gradient are skipped.
class Sgd {
 public:
  Sgd(NamedTensors params, Real lr, Real momentum = 0.9, Real weight_decay = 5e-4);

  void step();
  void zero_grad();
  void set_lr(Real lr) { lr_ = lr; }
  Real lr() const { return lr_; }
  std::uint64_t steps() const { return steps_; }

  NamedTensors named_state() const;
  void set_steps(std::uint64_t steps) { steps_ = steps; }

 private:
  NamedTensors params_;
  std::vector<Tensor> momentum_buf_;
  Real lr_, momentum_, weight_decay_;
  std::uint64_t steps_ = 0;
};

// Adam with bias correction (no weight decay). Per-parameter step counts so a
// parameter that receives no gradient on some step is not advanced.
class Adam {
 public:
  Adam(NamedTensors params, Real lr, Real beta1 = 0.9, Real beta2 = 0.99, Real eps = 1e-8);

  void step();
  void zero_grad();
  void set_lr(Real lr) { lr_ = lr; }
  Real lr() const { return lr_; }
  std::uint64_t steps() const { return steps_; }

  NamedTensors named_state() const;
  void set_steps(std::uint64_t steps) { steps_ = steps; }

 private:
  NamedTensors params_;
  std::vector<Tensor> m_, v_, t_;
  Real lr_, beta1_, beta2_, eps_;
  std::uint64_t steps_ = 0;
};

}  // namespace seatlab
