#include "seatlab/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace seatlab {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : node_(std::make_shared<detail::Node>()) {
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<Real> data) : node_(std::make_shared<detail::Node>()) {
  if (data.size() != shape_numel(shape)) {
    throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_to_string(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("Tensor: undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw std::out_of_range("Tensor::dim: axis out of range");
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<Real> Tensor::data() { return node_->data; }
std::span<const Real> Tensor::data() const { return node_->data; }

Real Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(numel()) + " elements");
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

std::span<const Real> Tensor::grad() const {
  if (!has_grad()) return {};
  return node_->grad;
}

std::span<Real> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->data.size(), Real{0});
}

Tensor Tensor::detach() const {
  Tensor out(shape());
  out.node_->data = node_->data;
  return out;
}

void Tensor::clear_grad() {
  if (node_) node_->grad.clear();
}

bool Tensor::is_leaf() const { return node_ && node_->parents.empty(); }

Tensor Tensor::make_result(Shape shape, std::vector<Real> data, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward) {
  Tensor out(std::move(shape), std::move(data));
  bool any = false;
  for (const Tensor& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->backward = std::move(backward);
  out.node_->parents.reserve(parents.size());
  for (Tensor& p : parents) out.node_->parents.push_back(std::move(p.node_));
  return out;
}

void Tensor::backward() const {
  if (!node_) throw std::logic_error("backward: undefined tensor");
  if (node_->data.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_to_string(node_->shape));
  }
  if (!node_->requires_grad) throw std::invalid_argument("backward: loss is not on the tape");

  // Iterative post-order DFS gives a topological order; walking it in reverse
  // visits each node once, after all of its consumers.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += Real{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->backward) continue;
    for (auto& p : n->parents) {
      if (p->requires_grad) p->ensure_grad();
    }
    n->backward(*n);
  }
  for (detail::Node* n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->parents.clear();
    }
  }
}

ScopedRequiresGrad::ScopedRequiresGrad(std::vector<Tensor> tensors, bool on) : tensors_(std::move(tensors)) {
  previous_.reserve(tensors_.size());
  for (Tensor& t : tensors_) {
    previous_.push_back(t.requires_grad());
    t.set_requires_grad(on);
  }
}

ScopedRequiresGrad::~ScopedRequiresGrad() {
  for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i].set_requires_grad(previous_[i]);
}

}  // namespace seatlab
