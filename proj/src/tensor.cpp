#include "scsco/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace scsco {

std::string Shape::str() const {
  std::ostringstream os;
  os << "[" << n << "," << c << "," << h << "," << w << "]";
  return os.str();
}

void check_shape(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(shape) {
  check_shape(shape.n >= 0 && shape.c >= 0 && shape.h >= 0 && shape.w >= 0,
              "negative tensor dimension " + shape.str());
  data_.assign(shape.numel(), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
  check_shape(shape.n >= 0 && shape.c >= 0 && shape.h >= 0 && shape.w >= 0,
              "negative tensor dimension " + shape.str());
  check_shape(data_.size() == shape.numel(),
              "tensor data length " + std::to_string(data_.size()) + " does not match " +
                  shape.str());
}

template <typename T>
BasicTensor<T> BasicTensor<T>::matrix(int rows, int cols, std::vector<T> data) {
  return BasicTensor({1, 1, rows, cols}, std::move(data));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  check_shape(shape.numel() == shape_.numel(),
              "cannot reshape " + shape_.str() + " to " + shape.str());
  return BasicTensor(shape, data_);
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  for (T v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
bool bit_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template bool bit_equal(const BasicTensor<float>&, const BasicTensor<float>&);
template bool bit_equal(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace scsco
