#include "roar/numerics/tape.hpp"

#include <stdexcept>

namespace roar {

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(const Tensor& value, Tensor* grad_sink) {
  Node n;
  n.ref = &value;
  n.sink = grad_sink;
  n.requires_grad = grad_sink != nullptr;
  if (grad_sink && grad_sink->shape() != value.shape()) {
    throw ShapeError("gradient sink shape " + shape_str(grad_sink->shape()) + " != parameter shape " +
                     shape_str(value.shape()));
  }
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape != this) throw std::logic_error("op mixes vars from different tapes");
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id).value(); }

bool Tape::requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

Tensor& Tape::accumulate(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.sink) return *n.sink;
  if (!n.has_grad) {
    n.grad = Tensor(n.value().shape());
    n.has_grad = true;
  }
  return n.grad;
}

bool Tape::has_grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.sink != nullptr || n.has_grad;
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.sink) return *n.sink;
  if (!n.has_grad) throw std::logic_error("no gradient recorded for node");
  return n.grad;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw std::logic_error("backward() called twice on the same tape");
  backward_done_ = true;
  Node& root = nodes_.at(loss.id);
  if (root.value().size() != 1) throw ShapeError("backward() needs a scalar loss");
  if (!root.requires_grad) return;
  accumulate(loss)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || !n.has_grad) continue;
    n.backward(n.grad);
  }
}

}  // namespace roar
