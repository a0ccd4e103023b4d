#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace prefmatch {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Raised when operand shapes are incompatible for an op.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string op, Shape lhs, Shape rhs);

  const std::string& op() const noexcept { return op_; }
  const Shape& lhs() const noexcept { return lhs_; }
  const Shape& rhs() const noexcept { return rhs_; }

 private:
  std::string op_;
  Shape lhs_;
  Shape rhs_;
};

/// Raised when an op produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string op, std::string detail);
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

/// Misuse of the reverse-mode machinery (non-scalar loss, reused graph).
class AutogradError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Node;

/// Receives the output node (value and accumulated gradient) and pushes
/// gradient contributions into the parents it captured.
using BackwardFn = std::function<void(const Node&)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  void accumulate(std::size_t i, double g);
  void ensure_grad();
};

/// Dense row-major tensor of doubles with optional gradient tracking.
///
/// A Tensor is a cheap handle; copies alias the same storage. Results of
/// ops that touch a grad-requiring input record their parents and a
/// backward rule, forming a tape that is rebuilt on every forward pass.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  /// Builds an op result. Parents that do not require grad are dropped;
  /// if none remain, the backward rule is discarded.
  static Tensor make_result(std::string_view op, Shape shape, std::vector<double> values,
                            std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t numel() const { return node().value.size(); }

  std::span<const double> values() const { return node().value; }
  std::span<double> mutable_values() { return node().value; }
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return node().requires_grad; }
  bool has_grad() const { return !node().grad.empty(); }
  std::span<const double> grad() const { return node().grad; }
  std::span<double> mutable_grad() { return node().grad; }
  void zero_grad();

  /// Copy of the values with no tape history.
  Tensor detach() const;

  Node& node() const;
  const std::shared_ptr<Node>& handle() const noexcept { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// reachable leaf that requires grad; the interior tape is released, so a
/// second call on the same loss throws.
void backward(const Tensor& loss);

}  // namespace prefmatch
