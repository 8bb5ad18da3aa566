#include "scsco/params.hpp"

#include <algorithm>

namespace scsco {

template <typename T>
void BasicParamStore<T>::add(std::string name, BasicTensor<T> tensor) {
  if (contains(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(tensor));
}

template <typename T>
bool BasicParamStore<T>::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

template <typename T>
std::size_t BasicParamStore<T>::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

template <typename T>
std::size_t BasicParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template <typename T>
BasicParamStore<T> BasicParamStore<T>::zeros_like() const {
  BasicParamStore out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], BasicTensor<T>(tensors_[i].shape()));
  return out;
}

template <typename T>
BoundParams<T>::BoundParams(Tape<T>& tape, const BasicParamStore<T>& store, bool requires_grad)
    : store_(&store) {
  vars_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    vars_.push_back(tape.leaf(store.tensor(i), requires_grad));
  }
}

template <typename T>
BoundParams<T>::BoundParams(const BasicParamStore<T>& layout, std::vector<Var<T>> vars)
    : store_(&layout), vars_(std::move(vars)) {
  check_shape(vars_.size() == layout.size(), "BoundParams: variable count differs from layout");
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    check_shape(vars_[i].shape() == layout.tensor(i).shape(),
                "BoundParams: dims differ for '" + layout.name(i) + "'");
  }
}

template <typename T>
BasicParamStore<T> BoundParams<T>::gradients() const {
  BasicParamStore<T> out;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    out.add(store_->name(i), vars_[i].tape->grad(vars_[i]));
  }
  return out;
}

template class BasicParamStore<float>;
template class BasicParamStore<double>;
template class BoundParams<float>;
template class BoundParams<double>;

}  // namespace scsco
