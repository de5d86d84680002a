#include "mvx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "mvx/error.hpp"

namespace mvx {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<T>>(shape_size(shape_), T(0))) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)) {
  if (data.size() != shape_size(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape_));
  }
  data_ = std::make_shared<std::vector<T>>(std::move(data));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value) {
  const auto n = shape_size(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
std::size_t BasicTensor<T>::dim(int axis) const {
  const int r = static_cast<int>(shape_.size());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape_));
  }
  return shape_[static_cast<std::size_t>(a)];
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_data() {
  if (!data_) return {};
  if (data_.use_count() > 1) data_ = std::make_shared<std::vector<T>>(*data_);
  return {data_->data(), data_->size()};
}

template <typename T>
T BasicTensor<T>::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape_));
  return (*data_)[0];
}

template <typename T>
std::size_t BasicTensor<T>::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw DimensionError("index rank mismatch for shape " + shape_str(shape_));
  }
  std::size_t off = 0;
  std::size_t i = 0;
  for (auto v : index) {
    if (v >= shape_[i]) throw DimensionError("index out of range for shape " + shape_str(shape_));
    off = off * shape_[i] + v;
    ++i;
  }
  return off;
}

template <typename T>
T BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  return (*data_)[offset(index)];
}

template <typename T>
T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) {
  const auto off = offset(index);
  return mutable_data()[off];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshape(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  BasicTensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  if (!data_) return {};
  return BasicTensor(shape_, *data_);
}

template <typename T>
bool BasicTensor<T>::identical(const BasicTensor& other) const {
  if (shape_ != other.shape_ || size() != other.size()) return false;
  if (size() == 0) return true;
  return std::memcmp(data_->data(), other.data_->data(), size() * sizeof(T)) == 0;
}

template <typename T>
T max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  T m = 0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template float max_abs_diff(const BasicTensor<float>&, const BasicTensor<float>&);
template double max_abs_diff(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace mvx
