#pragma once

#include <string>
#include <vector>

#include "scsco/tape.hpp"

namespace scsco {

// Ordered collection of named tensors. Order is insertion order and is the
// order used for serialization and gradient reduction.
template <typename T>
class BasicParamStore {
 public:
  void add(std::string name, BasicTensor<T> tensor);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const { return names_; }
  BasicTensor<T>& tensor(std::size_t i) { return tensors_[i]; }
  const BasicTensor<T>& tensor(std::size_t i) const { return tensors_[i]; }

  bool contains(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  const BasicTensor<T>& operator[](const std::string& name) const {
    return tensors_[index_of(name)];
  }
  BasicTensor<T>& operator[](const std::string& name) { return tensors_[index_of(name)]; }

  std::size_t scalar_count() const;

  // Same names and dims, all zeros.
  BasicParamStore zeros_like() const;

  template <typename U>
  BasicParamStore<U> cast() const {
    BasicParamStore<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

  friend bool operator==(const BasicParamStore&, const BasicParamStore&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<BasicTensor<T>> tensors_;
};

using ParamStore = BasicParamStore<float>;

// A parameter store placed on a tape, one leaf per tensor.
template <typename T>
class BoundParams {
 public:
  BoundParams(Tape<T>& tape, const BasicParamStore<T>& store, bool requires_grad);
  // Names from `layout`, values from existing tape variables in layout order.
  BoundParams(const BasicParamStore<T>& layout, std::vector<Var<T>> vars);

  Var<T> operator[](const std::string& name) const { return vars_[store_->index_of(name)]; }
  const std::vector<Var<T>>& vars() const { return vars_; }

  // Gradients after tape.backward(), in store order.
  BasicParamStore<T> gradients() const;

 private:
  const BasicParamStore<T>* store_;
  std::vector<Var<T>> vars_;
};

}  // namespace scsco
