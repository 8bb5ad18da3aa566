#include "scsco/tape.hpp"

namespace scsco {

template <typename T>
Var<T> Tape<T>::leaf(BasicTensor<T> value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("non-finite value in tape leaf");
  Node node;
  node.op = requires_grad ? "leaf" : "constant";
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::record(const char* op, BasicTensor<T> value, const std::vector<Var<T>>& inputs,
                       BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite output from ") + op);
  }
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape != this) throw InvalidArgument(std::string(op) + ": input from another tape");
    needs = needs || nodes_[in.id].requires_grad;
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.requires_grad = needs;
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
BasicTensor<T> Tape<T>::grad(Var<T> v) const {
  const Node& node = nodes_[v.id];
  if (node.grad.empty() && node.value.size() != 0) return BasicTensor<T>(node.value.shape());
  return node.grad;
}

template <typename T>
BasicTensor<T>& Tape<T>::grad_slot(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.shape() != node.value.shape() || node.grad.size() != node.value.size()) {
    node.grad = BasicTensor<T>(node.value.shape());
  }
  return node.grad;
}

template <typename T>
void Tape<T>::accumulate(std::size_t id, const BasicTensor<T>& g) {
  if (!nodes_[id].requires_grad) return;
  BasicTensor<T>& slot = grad_slot(id);
  check_shape(slot.shape() == g.shape(), "gradient shape " + g.shape().str() +
                                             " does not match value " + slot.shape().str());
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void Tape<T>::backward(Var<T> target) {
  check_shape(value(target).size() == 1, "backward() without seed needs a scalar target, got " +
                                             value(target).shape().str());
  backward(target, BasicTensor<T>(value(target).shape(), T(1)));
}

template <typename T>
void Tape<T>::backward(Var<T> target, const BasicTensor<T>& seed) {
  check_shape(seed.shape() == value(target).shape(), "backward seed shape mismatch");
  for (auto& node : nodes_) node.grad = BasicTensor<T>();
  visited_.clear();
  if (!nodes_[target.id].requires_grad) return;
  nodes_[target.id].grad = seed;
  for (std::size_t i = target.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.size() == 0) continue;
    visited_.push_back(i);
    // Intermediate gradients are released once propagated; leaves keep theirs.
    const BasicTensor<T> g = std::move(node.grad);
    node.grad = BasicTensor<T>();
    node.backward(*this, i, g);
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace scsco
