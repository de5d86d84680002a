#pragma once

#include <span>

#include "mvx/tensor.hpp"

// Pure tensor primitives. Every function allocates its result and leaves the
// operands untouched; identical inputs give bit-identical outputs.
namespace mvx::ops {

// [..., m, k] x [..., k, n]. Leading batch dims must match exactly, or one
// operand may be rank 2 and is then shared across the other's batch.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

// Swaps the last two axes.
template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& x);

// x[..., d_in] * w[d_in, d_out] (+ bias[d_out] when non-empty).
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w,
                      const BasicTensor<T>& bias = {});

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x, int axis = -1);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

// Elementwise with numpy-style broadcasting (right-aligned, size-1 stretches).
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);

template <typename T>
BasicTensor<T> concat(std::span<const BasicTensor<T>> parts, int axis);

template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& x, int axis, std::size_t start, std::size_t length);

// Reductions drop the reduced axis.
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x, int axis);
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x, int axis);
template <typename T>
BasicTensor<T> max(const BasicTensor<T>& x, int axis);
template <typename T>
BasicTensor<T> sum_all(const BasicTensor<T>& x);

// Inserts a size-1 axis at `axis`.
template <typename T>
BasicTensor<T> unsqueeze(const BasicTensor<T>& x, int axis);

// Depthwise 1-D convolution along the token axis of x[B, L, D] with
// kernel[k, D], k odd, zero "same" padding:
//   out[b, l, d] = sum_j kernel[j, d] * x[b, l + j - k/2, d]
template <typename T>
BasicTensor<T> dwconv1d(const BasicTensor<T>& x, const BasicTensor<T>& kernel);

// Sums a broadcast gradient back down to `shape`.
template <typename T>
BasicTensor<T> reduce_to_shape(const BasicTensor<T>& x, const Shape& shape);

Shape broadcast_shape(const Shape& a, const Shape& b);

}  // namespace mvx::ops
