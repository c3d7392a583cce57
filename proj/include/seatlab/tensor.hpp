#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace seatlab {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

// One vertex of the define-by-run graph. Leaves (parameters, inputs) have no
// parents and no backward function; results of ops hold both until the
// graph is consumed by backward().
struct Node {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), Real{0});
  }
};

}  // namespace detail

// Handle to an n-dimensional real array that may participate in reverse-mode
// differentiation. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real{0});
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Real value) { return Tensor(std::move(shape), value); }
  static Tensor scalar(Real value) { return Tensor(Shape{1}, value); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<Real> data();
  std::span<const Real> data() const;
  Real item() const;
  Real& at(std::size_t flat) { return data()[flat]; }
  Real at(std::size_t flat) const { return data()[flat]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  // Empty span when no gradient has been accumulated yet.
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();
  // Drops the gradient buffer entirely (has_grad() becomes false).
  void clear_grad();

  // New leaf with copied values and no graph history.
  Tensor detach() const;
  Tensor clone() const { return detach().set_requires_grad(requires_grad()); }

  // Reverse pass from a one-element tensor. Gradients accumulate (+=) into
  // every reachable node that requires grad; the interior of the graph is
  // released afterwards so a graph can only be walked once.
  void backward() const;

  bool is_leaf() const;
  const std::shared_ptr<detail::Node>& node() const { return node_; }

  // Builds the result of a differentiable op. When no parent requires grad
  // the backward closure is dropped and the result is a plain leaf.
  static Tensor make_result(Shape shape, std::vector<Real> data,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Sets requires_grad on a group of tensors and restores the previous flags
// when destroyed.
class ScopedRequiresGrad {
 public:
  ScopedRequiresGrad(std::vector<Tensor> tensors, bool on);
  ~ScopedRequiresGrad();
  ScopedRequiresGrad(const ScopedRequiresGrad&) = delete;
  ScopedRequiresGrad& operator=(const ScopedRequiresGrad&) = delete;

 private:
  std::vector<Tensor> tensors_;
  std::vector<bool> previous_;
};

}  // namespace seatlab
