#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace meshssm::nd {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the dynamically recorded computation graph. Parents are the
// op inputs; `backward` reads `grad` (the upstream gradient of this node) and
// accumulates vector-Jacobian products into the parents that require grad.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node& self)> backward;

  // Gradient storage of a parent, allocated on first use; nullptr when the
  // parent does not take part in differentiation.
  static double* grad_of(const std::shared_ptr<Node>& node);
};

}  // namespace detail

// Handle to a dense row-major array of doubles that may participate in
// reverse-mode differentiation. Copies share the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size() const;
  std::size_t rows() const;
  // Trailing extent for 2-D tensors, 1 for 1-D.
  std::size_t cols() const;

  std::span<const double> data() const;
  // Leaves only: optimizers and loaders write parameter values in place.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t row, std::size_t col) const { return data()[row * cols() + col]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;
  // Deep copy of values into a fresh leaf.
  Tensor clone() const;

  // Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls.
  void backward() const;

  std::string_view op_name() const;
  const std::shared_ptr<detail::Node>& node() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Builds an op output. Values are checked for NaN/Inf (NumericError naming the
// op). The graph edge is only recorded when grad mode is on and some parent
// requires grad.
Tensor make_op(std::string_view op, Shape shape, std::vector<double> value,
               std::vector<Tensor> parents, std::function<void(Node&)> backward);

}  // namespace detail

}  // namespace meshssm::nd
