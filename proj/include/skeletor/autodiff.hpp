#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "skeletor/tensor.hpp"

namespace skeletor {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records operations in execution order. Because every node's inputs are
// recorded before the node itself, walking the records backwards visits
// them in reverse topological order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var variable(Tensor value) { return leaf(std::move(value), true); }
  Var leaf(Tensor value, bool requires_grad);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient of the last backward() target w.r.t. v. Zero-filled when v was
  // unreachable from the loss.
  Tensor grad(Var v) const;

  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

  // For op implementations.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& upstream(std::size_t id) const { return grads_[id]; }
  // Lazily zero-initialised gradient accumulator for node id.
  Tensor& accumulator(std::size_t id);

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;  // stable references while the tape grows
  std::vector<Tensor> grads_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

// Differentiable operations. All shapes are checked; mismatches throw
// Error(ErrorKind::shape).

// a: [..., k] x b: [k, n] -> [..., n]; or batched a: [B, m, k] x b: [B, k, n].
Var matmul(Var a, Var b);
// Swap the last two axes.
Var transpose(Var a);
// b's shape must equal a trailing suffix of a's shape; b broadcasts over the
// leading axes of a.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
// Subgradient at exactly 0 is 0.
Var relu(Var a);
Var softmax(Var a, std::size_t axis);
// Normalises along the last axis, then applies gain and bias (each [n]).
Var layer_norm(Var x, Var gain, Var bias, double epsilon);
Var concat_last(std::span<const Var> parts);
Var reshape(Var a, Shape shape);
Var sum(Var a);
// Weighted mean of squared differences: sum w (p - t)^2 / sum w. With no
// weights every element counts once.
Var mse(Var prediction, Var target);
Var mse(Var prediction, Var target, const Tensor& weights);

// Value-only helpers (no tape).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon);
Tensor relu(const Tensor& a);

}  // namespace skeletor
