#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mvx {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array. Storage is shared between copies and never mutated
// once a second handle exists; mutable_data() detaches first.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape);
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor full(Shape shape, T value);
  static BasicTensor scalar(T value) { return full({}, value); }

  bool empty() const { return data_ == nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  // Negative axes count from the back.
  std::size_t dim(int axis) const;
  std::size_t size() const { return data_ ? data_->size() : 0; }

  std::span<const T> data() const;
  std::span<T> mutable_data();

  T item() const;
  T at(std::initializer_list<std::size_t> index) const;
  T& at(std::initializer_list<std::size_t> index);

  BasicTensor reshape(Shape shape) const;
  BasicTensor clone() const;

  template <typename U>
  BasicTensor<U> cast() const {
    if (empty()) return {};
    std::vector<U> out(size());
    auto src = data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(src[i]);
    return BasicTensor<U>(shape_, std::move(out));
  }

  // True when shapes agree and every element compares equal bit for bit.
  bool identical(const BasicTensor& other) const;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

template <typename T>
T max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace mvx
