#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scsco/tensor.hpp"

namespace scsco {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
// tape is alive.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const BasicTensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode gradient tape. Operations append nodes in evaluation order;
// backward() replays their rules in exact reverse order. Not thread-safe: use
// one tape per thread.
template <typename T>
class Tape {
 public:
  // Accumulates into the gradients of the node's inputs given dL/d(output).
  // `self` is the id of the node being replayed, so rules can read their own
  // forward value.
  using BackwardFn =
      std::function<void(Tape&, std::size_t self, const BasicTensor<T>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(BasicTensor<T> value, bool requires_grad = true);
  Var<T> constant(BasicTensor<T> value) { return leaf(std::move(value), false); }

  // Appends an operation result. The backward rule is dropped when none of
  // `inputs` needs a gradient. Throws NumericError on non-finite output.
  Var<T> record(const char* op, BasicTensor<T> value, const std::vector<Var<T>>& inputs,
                BackwardFn backward);

  const BasicTensor<T>& value(Var<T> v) const { return nodes_[v.id].value; }
  const BasicTensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient of the last backward() target with respect to v; zeros if v was
  // not reached.
  BasicTensor<T> grad(Var<T> v) const;

  // Adds g into the gradient slot of `id`, allocating it on first use.
  void accumulate(std::size_t id, const BasicTensor<T>& g);
  // Mutable gradient slot, zero-initialised on first use. Only valid for
  // nodes that require a gradient.
  BasicTensor<T>& grad_slot(std::size_t id);

  // Seeds d(target)/d(target) = 1 for a single-element target.
  void backward(Var<T> target);
  // Seeds an arbitrary upstream gradient with the target's shape.
  void backward(Var<T> target, const BasicTensor<T>& seed);

  std::size_t size() const { return nodes_.size(); }
  const std::string& op_name(std::size_t id) const { return nodes_[id].op; }
  // Node ids whose backward rule ran during the last backward(), in visit order.
  const std::vector<std::size_t>& last_backward_order() const { return visited_; }

 private:
  struct Node {
    std::string op;
    BasicTensor<T> value;
    BasicTensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> visited_;
};

}  // namespace scsco
