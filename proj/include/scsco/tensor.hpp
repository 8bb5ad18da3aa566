#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scsco {

// Precondition or shape violation in a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A masked region carries (numerically) no weight.
class DegenerateRegion : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// NaN/Inf produced or observed during computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  constexpr std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  constexpr std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const;
};

// Rank-4 dense array in (n, c, h, w) row-major order. Matrices are carried as
// [1, 1, rows, cols].
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor matrix(int rows, int cols, std::vector<T> data);
  static BasicTensor scalar(T v) { return BasicTensor({1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  // Matrix accessors for [1, 1, rows, cols] tensors.
  int rows() const { return shape_.h; }
  int cols() const { return shape_.w; }
  T& operator()(int r, int col) { return data_[static_cast<std::size_t>(r) * shape_.w + col]; }
  const T& operator()(int r, int col) const {
    return data_[static_cast<std::size_t>(r) * shape_.w + col];
  }

  BasicTensor reshaped(Shape shape) const;
  bool all_finite() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// Bitwise equality of the float payloads (distinguishes -0 and +0, treats
// identical NaN bit patterns as equal).
template <typename T>
bool bit_equal(const BasicTensor<T>& a, const BasicTensor<T>& b);

void check_shape(bool ok, const std::string& what);

}  // namespace scsco
