#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "roar/numerics/tensor.hpp"

namespace roar {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode recording of primitive ops. Nodes are appended in evaluation
// order, so reverse insertion order is a valid reverse topological order and
// backward() visits each node exactly once. References returned by value()
// stay valid for the lifetime of the tape.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  // Records a reference to an externally owned tensor. Gradients accumulate
  // straight into *grad_sink (which must outlive backward()); a null sink
  // makes the parameter a constant for this tape.
  Var parameter(const Tensor& value, Tensor* grad_sink);

  // Appends an op result. `backward` receives dL/d(result) and must route it
  // to the inputs through accumulate(). Dropped when no input needs a gradient.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  // Gradient buffer of `v`, zero-initialised on first use. Only valid for
  // nodes that require a gradient.
  Tensor& accumulate(Var v);
  bool has_grad(Var v) const;
  const Tensor& grad(Var v) const;

  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor grad;
    Tensor* sink = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;

    const Tensor& value() const { return ref ? *ref : owned; }
  };

  Var push(Node node);

  std::deque<Node> nodes_;  // deque: value references stay valid while recording
  bool backward_done_ = false;
};

}  // namespace roar
