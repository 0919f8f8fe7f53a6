// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mixcrypt::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;

/// Called once during backward with the node whose grad is complete; it
/// accumulates into the grads of node.parents.
using BackwardFn = std::function<void(Node&)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  /// Allocates grad (zeroed) on first use and returns it.
  std::vector<double>& grad_buffer();
};

/// Shape-carrying array of doubles taking part in a reverse-mode tape.
///
/// Tensors are handles: copies alias the same node. Every op returns a new
/// node; when at least one input requires grad the node remembers its parents
/// and a backward closure. The tape is released by backward().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  /// Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  void zero_grad();

  /// Populates d(this)/d(p) on every requires_grad ancestor p, accumulating
  /// into existing grads, then releases the tape below this node.
  void backward();

  /// Same values, cut from the tape.
  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

/// While alive, ops on this thread record no tape (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Builds the result node of an op. The backward closure and parents are
/// recorded only when some input requires grad.
Tensor make_result(Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, BackwardFn backward);

}  // namespace mixcrypt::ad
