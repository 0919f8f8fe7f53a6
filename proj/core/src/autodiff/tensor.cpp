// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/autodiff/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::ad {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

namespace {

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor " + shape_string(shape) + " given " + std::to_string(values.size()) +
                         " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(new_node({1}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) throw DimensionError("axis out of range");
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }
std::span<double> Tensor::data() { return node_->data; }
std::span<const double> Tensor::data() const { return node_->data; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor " + shape_string(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_->is_leaf) throw ContractError("requires_grad can only be set on leaf tensors");
  node_->requires_grad = on;
  return *this;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return Tensor(new_node(shape(), node_->data, false)); }

Tensor Tensor::clone() const {
  auto copy = new_node(shape(), node_->data, node_->requires_grad);
  return Tensor(std::move(copy));
}

void Tensor::backward() {
  if (!node_) throw ContractError("backward on undefined tensor");
  if (numel() != 1) throw ContractError("backward requires a scalar loss, got " + shape_string(shape()));
  if (!node_->requires_grad) throw ContractError("loss does not depend on any tensor requiring grad");
  if (!node_->is_leaf && !node_->backward) throw ContractError("tape already released by a previous backward");

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (Node* n : order) {
    if (n->is_leaf) continue;
    n->backward = nullptr;
    n->parents.clear();
    if (n != node_.get()) n->grad.clear();
  }
}

namespace {
thread_local bool tls_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(tls_grad_enabled) { tls_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tls_grad_enabled = previous_; }
bool grad_enabled() { return tls_grad_enabled; }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs, BackwardFn backward) {
  auto node = new_node(std::move(shape), std::move(data), false);
  node->is_leaf = false;
  bool needs = tls_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace mixcrypt::ad
