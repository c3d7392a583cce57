#include "seatlab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace seatlab {

Real poly_lr(std::size_t iter, std::size_t max_iter, Real base_lr, Real power) {
  if (iter > max_iter) {
    throw std::invalid_argument("poly_lr: iteration " + std::to_string(iter) + " beyond max " +
                                std::to_string(max_iter));
  }
  if (max_iter == 0) return base_lr;
  return base_lr * std::pow(1 - static_cast<Real>(iter) / static_cast<Real>(max_iter), power);
}

namespace {

void clear_grads(NamedTensors& params) {
  for (auto& [name, t] : params) t.clear_grad();
}

}  // namespace

Sgd::Sgd(NamedTensors params, Real lr, Real momentum, Real weight_decay)
    : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  for (auto& [name, p] : params_) momentum_buf_.emplace_back(p.shape());
}

void Sgd::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    if (!p.has_grad()) continue;
    auto data = p.data();
    const auto grad = p.grad();
    auto buf = momentum_buf_[i].data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      buf[k] = momentum_ * buf[k] + (grad[k] + weight_decay_ * data[k]);
      data[k] -= lr_ * buf[k];
    }
  }
  ++steps_;
}

void Sgd::zero_grad() { clear_grads(params_); }

NamedTensors Sgd::named_state() const {
  NamedTensors out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.emplace_back("momentum." + params_[i].first, momentum_buf_[i]);
  return out;
}

Adam::Adam(NamedTensors params, Real lr, Real beta1, Real beta2, Real eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto& [name, p] : params_) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
    t_.emplace_back(Shape{1});
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    if (!p.has_grad()) continue;
    const Real t = t_[i].data()[0] += 1;
    const Real bc1 = 1 - std::pow(beta1_, t);
    const Real bc2 = 1 - std::pow(beta2_, t);
    auto data = p.data();
    const auto grad = p.grad();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      m[k] = beta1_ * m[k] + (1 - beta1_) * grad[k];
      v[k] = beta2_ * v[k] + (1 - beta2_) * grad[k] * grad[k];
      const Real m_hat = m[k] / bc1;
      const Real v_hat = v[k] / bc2;
      data[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
  ++steps_;
}

void Adam::zero_grad() { clear_grads(params_); }

NamedTensors Adam::named_state() const {
  NamedTensors out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back("m." + params_[i].first, m_[i]);
    out.emplace_back("v." + params_[i].first, v_[i]);
    out.emplace_back("t." + params_[i].first, t_[i]);
  }
  return out;
}

}  // namespace seatlab
