#include "prefmatch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace prefmatch {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ShapeError::ShapeError(std::string op, Shape lhs, Shape rhs)
    : std::invalid_argument(op + ": shape mismatch " + to_string(lhs) + " vs " + to_string(rhs)),
      op_(std::move(op)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

NumericError::NumericError(std::string op, std::string detail)
    : std::runtime_error(op + ": " + detail), op_(std::move(op)) {}

void Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
}

void Node::accumulate(std::size_t i, double g) {
  ensure_grad();
  grad[i] += g;
}

namespace {

void validate_shape(const Shape& shape, std::size_t n) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
  for (auto e : shape)
    if (e == 0) throw std::invalid_argument("tensor extents must be positive: " + to_string(shape));
  if (element_count(shape) != n)
    throw std::invalid_argument("value count " + std::to_string(n) + " does not match shape " +
                                to_string(shape));
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = element_count(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape, values.size());
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1, 1}, {value}, requires_grad); }

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from({n, n}, std::move(v));
}

Tensor Tensor::make_result(std::string_view op, Shape shape, std::vector<double> values,
                           std::vector<Tensor> parents, BackwardFn backward) {
  validate_shape(shape, values.size());
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op), "non-finite output");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  node->leaf = false;
  for (auto& p : parents) {
    if (p.defined() && p.requires_grad()) node->parents.push_back(p.node_);
  }
  if (!node->parents.empty()) {
    node->requires_grad = true;
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Node& Tensor::node() const {
  if (!node_) throw std::logic_error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.size() == 1 ? 1 : s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() > 2) throw std::invalid_argument("cols() requires rank <= 2, got " + to_string(s));
  return s.back();
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on non-scalar tensor " + to_string(shape()));
  return node().value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node().value.at(r * cols() + c); }

void Tensor::zero_grad() { node().grad.assign(numel(), 0.0); }

Tensor Tensor::detach() const { return from(shape(), node().value, false); }

void backward(const Tensor& loss) {
  Node& root = loss.node();
  if (root.value.size() != 1)
    throw AutogradError("backward requires a scalar loss, got shape " + to_string(root.shape));
  if (root.consumed)
    throw AutogradError("backward already ran on this graph; run a new forward pass first");
  root.consumed = true;
  if (!root.requires_grad) return;
  if (root.leaf) {
    root.accumulate(0, 1.0);
    return;
  }

  // Iterative post-order DFS over interior nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (!p->leaf && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (Node* n : order) {
    n->backward = nullptr;
    n->parents.clear();
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

}  // namespace prefmatch
