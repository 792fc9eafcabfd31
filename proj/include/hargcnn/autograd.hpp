#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "hargcnn/tensor.hpp"

namespace hargcnn {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recorder. Forward ops append nodes in evaluation order, so a
/// reverse sweep over the node list is a valid topological order.
///
/// A tape built with `recording = false` keeps values only; it is what the
/// read-only prediction path uses, and it never touches Parameter::grad.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value);
  /// Borrow a tensor without copying; it must outlive the tape.
  Var constant_ref(const Tensor& value);
  /// Leaf whose gradient is accumulated into `param.grad` by backward().
  Var param(Parameter& param);
  /// Read-only view of a parameter (no gradient flows back).
  Var param_ref(const Parameter& param) { return constant_ref(param.value); }

  /// Record an op output. `backward` is only stored when recording and at least
  /// one input needs a gradient.
  Var push(Tensor value, std::span<const Var> inputs, Backward backward);
  Var push(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  const Tensor& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Add `delta` into the gradient slot of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Tensor& delta);
  /// Mutable gradient slot, zero-initialised on first access.
  Tensor& grad_slot(std::size_t id);

  /// Propagate d(loss)/d(node) for every node and add leaf gradients into their
  /// Parameters. `loss` must be a one-element tensor recorded on this tape.
  void backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  bool recording_;
  std::vector<Node> nodes_;
};

}  // namespace hargcnn
