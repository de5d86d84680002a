#include "mvx/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mvx/error.hpp"

namespace mvx::ops {
namespace {

std::size_t norm_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  Eigen::Map<const RowMat<T>> A(a, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  Eigen::Map<const RowMat<T>> B(b, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  Eigen::Map<RowMat<T>> C(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  C.noalias() = A * B;
}

struct Split {
  std::size_t outer, n, inner;
};

Split split_at(const Shape& s, std::size_t axis) {
  Split sp{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

// Strides of `shape` seen through the broadcast `out` shape (0 on stretched axes).
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  const std::size_t off = out.size() - shape.size();
  for (std::size_t i = shape.size(); i-- > 0;) {
    strides[i + off] = shape[i] == 1 ? 0 : stride;
    stride *= shape[i];
  }
  return strides;
}

template <typename T, typename F>
BasicTensor<T> broadcast_binary(const BasicTensor<T>& a, const BasicTensor<T>& b, F f) {
  if (a.shape() == b.shape()) {
    BasicTensor<T> out(a.shape());
    auto o = out.mutable_data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i], y[i]);
    return out;
  }
  const Shape shape = broadcast_shape(a.shape(), b.shape());
  const auto sa = broadcast_strides(a.shape(), shape);
  const auto sb = broadcast_strides(b.shape(), shape);
  BasicTensor<T> out(shape);
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  std::vector<std::size_t> idx(shape.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = f(x[ia], y[ib]);
    for (std::size_t d = shape.size(); d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < shape[d]) break;
      ia -= sa[d] * shape[d];
      ib -= sb[d] * shape[d];
      idx[d] = 0;
    }
  }
  return out;
}

template <typename T, typename F>
BasicTensor<T> unary(const BasicTensor<T>& x, F f) {
  BasicTensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(in[i]);
  return out;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(-2), k = a.dim(-1), kb = b.dim(-2), n = b.dim(-1);
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  if (k != kb || (!batch_a.empty() && !batch_b.empty() && batch_a != batch_b)) {
    throw DimensionError("matmul shape mismatch " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  if (batch_b.empty()) {
    // Shared right operand: fold the batch into the row dimension.
    Shape out_shape = batch_a;
    out_shape.push_back(m);
    out_shape.push_back(n);
    BasicTensor<T> out(out_shape);
    gemm(a.data().data(), b.data().data(), out.mutable_data().data(), shape_size(batch_a) * m, k,
         n);
    return out;
  }
  const std::size_t batches = shape_size(batch_b);
  Shape out_shape = batch_b;
  out_shape.push_back(m);
  out_shape.push_back(n);
  BasicTensor<T> out(out_shape);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = out.mutable_data().data();
  const std::size_t stride_a = batch_a.empty() ? 0 : m * k;
  for (std::size_t i = 0; i < batches; ++i) {
    gemm(pa + i * stride_a, pb + i * k * n, pc + i * m * n, m, k, n);
  }
  return out;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& x) {
  if (x.rank() < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_str(x.shape()));
  const std::size_t r = x.dim(-2), c = x.dim(-1);
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  BasicTensor<T> out(shape);
  auto o = out.mutable_data();
  auto in = x.data();
  const std::size_t batches = x.size() / (r * c);
  for (std::size_t b = 0; b < batches; ++b) {
    const T* src = in.data() + b * r * c;
    T* dst = o.data() + b * r * c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
  }
  return out;
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias) {
  if (w.rank() != 2 || x.rank() < 1 || x.dim(-1) != w.dim(0)) {
    throw DimensionError("linear shape mismatch: x " + shape_str(x.shape()) + ", W " +
                         shape_str(w.shape()));
  }
  const std::size_t d_in = w.dim(0), d_out = w.dim(1);
  Shape out_shape = x.shape();
  out_shape.back() = d_out;
  BasicTensor<T> out(out_shape);
  const std::size_t rows = x.size() / d_in;
  gemm(x.data().data(), w.data().data(), out.mutable_data().data(), rows, d_in, d_out);
  if (!bias.empty()) {
    if (bias.size() != d_out) {
      throw DimensionError("linear bias " + shape_str(bias.shape()) + " does not match W " +
                           shape_str(w.shape()));
    }
    auto o = out.mutable_data();
    auto bb = bias.data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < d_out; ++j) o[r * d_out + j] += bb[j];
  }
  return out;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x, int axis) {
  const auto ax = norm_axis(axis, x.rank());
  const Split sp = split_at(x.shape(), ax);
  BasicTensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::size_t a = 0; a < sp.outer; ++a) {
    for (std::size_t c = 0; c < sp.inner; ++c) {
      const std::size_t base = a * sp.n * sp.inner + c;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < sp.n; ++i) mx = std::max(mx, in[base + i * sp.inner]);
      T total = 0;
      for (std::size_t i = 0; i < sp.n; ++i) {
        const T e = std::exp(in[base + i * sp.inner] - mx);
        o[base + i * sp.inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < sp.n; ++i) o[base + i * sp.inner] /= total;
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return unary(x, [](T v) {
    if (v >= 0) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  return unary(x, [](T v) { return v > T(0) ? v : T(0); });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return broadcast_binary(a, b, [](T u, T v) { return u + v; });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return broadcast_binary(a, b, [](T u, T v) { return u - v; });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return broadcast_binary(a, b, [](T u, T v) { return u * v; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  return unary(x, [factor](T v) { return v * factor; });
}

template <typename T>
BasicTensor<T> concat(std::span<const BasicTensor<T>> parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const auto ax = norm_axis(axis, parts[0].rank());
  Shape shape = parts[0].shape();
  shape[ax] = 0;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != shape.size()) {
      throw DimensionError("concat rank mismatch: " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    shape[ax] += probe[ax];
    probe[ax] = 0;
    Shape ref = parts[0].shape();
    ref[ax] = 0;
    if (probe != ref) {
      throw DimensionError("concat shape mismatch: " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
  }
  BasicTensor<T> out(shape);
  auto o = out.mutable_data();
  const Split sp = split_at(shape, ax);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = p.shape()[ax] * sp.inner;
    auto in = p.data();
    for (std::size_t a = 0; a < sp.outer; ++a) {
      std::copy_n(in.data() + a * chunk, chunk, o.data() + a * sp.n * sp.inner + offset);
    }
    offset += chunk;
  }
  return out;
}

template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& x, int axis, std::size_t start, std::size_t length) {
  const auto ax = norm_axis(axis, x.rank());
  if (start + length > x.shape()[ax] || length == 0) {
    throw DimensionError("slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                         ") out of range for shape " + shape_str(x.shape()));
  }
  const Split sp = split_at(x.shape(), ax);
  Shape shape = x.shape();
  shape[ax] = length;
  BasicTensor<T> out(shape);
  auto o = out.mutable_data();
  auto in = x.data();
  const std::size_t chunk = length * sp.inner;
  for (std::size_t a = 0; a < sp.outer; ++a) {
    std::copy_n(in.data() + a * sp.n * sp.inner + start * sp.inner, chunk, o.data() + a * chunk);
  }
  return out;
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x, int axis) {
  const auto ax = norm_axis(axis, x.rank());
  const Split sp = split_at(x.shape(), ax);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(ax));
  BasicTensor<T> out(shape);
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::size_t a = 0; a < sp.outer; ++a)
    for (std::size_t i = 0; i < sp.n; ++i)
      for (std::size_t c = 0; c < sp.inner; ++c)
        o[a * sp.inner + c] += in[(a * sp.n + i) * sp.inner + c];
  return out;
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x, int axis) {
  const auto n = x.dim(axis);
  if (n == 0) throw DimensionError("mean over empty axis");
  return scale(sum(x, axis), T(1) / static_cast<T>(n));
}

template <typename T>
BasicTensor<T> max(const BasicTensor<T>& x, int axis) {
  const auto ax = norm_axis(axis, x.rank());
  const Split sp = split_at(x.shape(), ax);
  if (sp.n == 0) throw DimensionError("max over empty axis");
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(ax));
  BasicTensor<T> out(shape);
  auto o = out.mutable_data();
  auto in = x.data();
  for (std::size_t a = 0; a < sp.outer; ++a)
    for (std::size_t c = 0; c < sp.inner; ++c) {
      T m = in[a * sp.n * sp.inner + c];
      for (std::size_t i = 1; i < sp.n; ++i) m = std::max(m, in[(a * sp.n + i) * sp.inner + c]);
      o[a * sp.inner + c] = m;
    }
  return out;
}

template <typename T>
BasicTensor<T> sum_all(const BasicTensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return BasicTensor<T>::scalar(total);
}

template <typename T>
BasicTensor<T> unsqueeze(const BasicTensor<T>& x, int axis) {
  const int r = static_cast<int>(x.rank()) + 1;
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw DimensionError("unsqueeze axis out of range");
  Shape shape = x.shape();
  shape.insert(shape.begin() + a, 1);
  return x.reshape(shape);
}

template <typename T>
BasicTensor<T> dwconv1d(const BasicTensor<T>& x, const BasicTensor<T>& kernel) {
  if (kernel.rank() != 2 || kernel.dim(0) % 2 == 0) {
    throw ConfigError("dwconv1d kernel must be [k, D] with odd k, got " +
                      shape_str(kernel.shape()));
  }
  if (x.rank() != 3 || x.dim(2) != kernel.dim(1)) {
    throw DimensionError("dwconv1d shape mismatch: x " + shape_str(x.shape()) + ", kernel " +
                         shape_str(kernel.shape()));
  }
  const std::size_t B = x.dim(0), L = x.dim(1), D = x.dim(2), k = kernel.dim(0);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  BasicTensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  auto w = kernel.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l) + static_cast<std::ptrdiff_t>(j) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
        const T* xr = in.data() + (b * L + static_cast<std::size_t>(src)) * D;
        const T* wr = w.data() + j * D;
        T* orow = o.data() + (b * L + l) * D;
        for (std::size_t d = 0; d < D; ++d) orow[d] += wr[d] * xr[d];
      }
  return out;
}

template <typename T>
BasicTensor<T> reduce_to_shape(const BasicTensor<T>& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (shape.size() > x.rank()) {
    throw DimensionError("cannot reduce " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  BasicTensor<T> out(shape);
  const auto strides = broadcast_strides(shape, x.shape());
  auto o = out.mutable_data();
  auto in = x.data();
  std::vector<std::size_t> idx(x.rank(), 0);
  std::size_t io = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    o[io] += in[i];
    for (std::size_t d = x.rank(); d-- > 0;) {
      ++idx[d];
      io += strides[d];
      if (idx[d] < x.shape()[d]) break;
      io -= strides[d] * x.shape()[d];
      idx[d] = 0;
    }
  }
  return out;
}

#define MVX_INSTANTIATE_OPS(T)                                                                  \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                     \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                 const BasicTensor<T>&);                                        \
  template BasicTensor<T> softmax(const BasicTensor<T>&, int);                                  \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                       \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                          \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                      \
  template BasicTensor<T> concat(std::span<const BasicTensor<T>>, int);                         \
  template BasicTensor<T> slice(const BasicTensor<T>&, int, std::size_t, std::size_t);          \
  template BasicTensor<T> mean(const BasicTensor<T>&, int);                                     \
  template BasicTensor<T> sum(const BasicTensor<T>&, int);                                      \
  template BasicTensor<T> max(const BasicTensor<T>&, int);                                      \
  template BasicTensor<T> sum_all(const BasicTensor<T>&);                                       \
  template BasicTensor<T> unsqueeze(const BasicTensor<T>&, int);                                \
  template BasicTensor<T> dwconv1d(const BasicTensor<T>&, const BasicTensor<T>&);               \
  template BasicTensor<T> reduce_to_shape(const BasicTensor<T>&, const Shape&);

MVX_INSTANTIATE_OPS(float)
MVX_INSTANTIATE_OPS(double)

}  // namespace mvx::ops
