#ifndef AVSAL_TENSOR_HPP
#define AVSAL_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "avsal/common.hpp"
#include "avsal/rng.hpp"

namespace avsal {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense row-major tensor. Plain value type: copies copy the buffer.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), S(0));
  }

  static Tensor full(Shape shape, S v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor from(Shape shape, std::vector<S> data) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.validate_shape();
    if (static_cast<std::int64_t>(data.size()) != shape_numel(t.shape_))
      throw ShapeError(cat("tensor data size ", data.size(), " does not match shape ", shape_str(t.shape_)));
    t.data_ = std::move(data);
    return t;
  }

  static Tensor scalar(S v) { return full({1}, v); }

  static Tensor random_uniform(Shape shape, Rng& rng, S lo = S(-1), S hi = S(1)) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = static_cast<S>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& vec() { return data_; }
  const std::vector<S>& vec() const { return data_; }

  S& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  S operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  S& at(std::initializer_list<int> idx) { return data_[offset(idx)]; }
  S at(std::initializer_list<int> idx) const { return data_[offset(idx)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor reshaped(Shape s) const {
    if (shape_numel(s) != numel())
      throw ShapeError(cat("reshape ", shape_str(shape_), " -> ", shape_str(s), " changes element count"));
    Tensor t;
    t.shape_ = std::move(s);
    t.data_ = data_;
    return t;
  }

  // Reductions accumulate in double so the result does not depend on S's
  // precision more than the stored values themselves do.
  double sum() const {
    double acc = 0.0;
    for (S x : data_) acc += static_cast<double>(x);
    return acc;
  }

  S min() const { return *std::min_element(data_.begin(), data_.end()); }
  S max() const { return *std::max_element(data_.begin(), data_.end()); }

  std::int64_t argmax() const {
    return static_cast<std::int64_t>(std::max_element(data_.begin(), data_.end()) - data_.begin());
  }

  bool all_finite() const {
    for (S x : data_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename T>
  Tensor<T> cast() const {
    std::vector<T> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
    return Tensor<T>::from(shape_, std::move(out));
  }

 private:
  void validate_shape() const {
    for (int d : shape_)
      if (d <= 0) throw ShapeError(cat("non-positive dimension in shape ", shape_str(shape_)));
  }

  std::size_t offset(std::initializer_list<int> idx) const {
    std::size_t off = 0, axis = 0;
    for (int i : idx) {
      off = off * static_cast<std::size_t>(shape_[axis]) + static_cast<std::size_t>(i);
      ++axis;
    }
    return off;
  }

  Shape shape_;
  std::vector<S> data_;
};

}  // namespace avsal

#endif  // AVSAL_TENSOR_HPP
