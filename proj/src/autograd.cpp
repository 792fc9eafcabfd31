#include "hargcnn/autograd.hpp"

#include <fmt/format.h>

#include "hargcnn/error.hpp"

namespace hargcnn {

const Tensor& Var::value() const {
  if (!tape_) fail(ErrorKind::state, "value() on an unbound Var");
  return tape_->value(id_);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant_ref(const Tensor& value) {
  Node node;
  node.borrowed = &value;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& param) {
  if (!recording_) return constant_ref(param.value);
  Node node;
  node.borrowed = &param.value;
  node.param = &param;
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Tensor value, std::span<const Var> inputs, Backward backward) {
  Node node;
  node.owned = std::move(value);
  if (recording_) {
    for (const auto& in : inputs) {
      if (in.tape() != this) fail(ErrorKind::state, "op input recorded on a different tape");
      if (nodes_[in.id()].needs_grad) node.needs_grad = true;
    }
    if (node.needs_grad) node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const auto& node = nodes_[id];
  return node.borrowed ? *node.borrowed : node.owned;
}

Tensor& Tape::grad_slot(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor::zeros_like(value(id));
  return node.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& delta) {
  if (!nodes_[id].needs_grad) return;
  grad_slot(id) += delta;
}

void Tape::backward(Var loss) {
  if (!loss.valid() || nodes_.empty()) fail(ErrorKind::state, "backward() called before any forward pass");
  if (loss.tape() != this) fail(ErrorKind::state, "loss was recorded on a different tape");
  if (!recording_) fail(ErrorKind::state, "backward() on a non-recording tape");
  if (value(loss.id()).size() != 1) {
    fail(ErrorKind::dimension,
         fmt::format("backward() needs a scalar loss, got {}", shape_string(value(loss.id()).shape())));
  }

  for (auto& node : nodes_) node.grad = Tensor();
  if (!nodes_[loss.id()].needs_grad) return;
  grad_slot(loss.id()).fill(1.0);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.empty()) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.param) node.param->grad += node.grad;
  }
}

}  // namespace hargcnn
