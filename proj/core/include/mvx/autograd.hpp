#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mvx/tensor.hpp"

namespace mvx {

template <typename T>
class Tape;

// A tensor value, optionally bound to a node on a Tape. Untracked vars are
// plain constants: operations on them compute values and record nothing.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(BasicTensor<T> value) : value_(std::move(value)) {}  // NOLINT(implicit)

  const BasicTensor<T>& value() const { return value_; }
  const Shape& shape() const { return value_.shape(); }
  std::size_t dim(int axis) const { return value_.dim(axis); }
  bool empty() const { return value_.empty(); }
  bool tracked() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape<T>;
  BasicTensor<T> value_;
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended after their inputs, so the node list
// is already a topological order. Single-threaded; do not share.
template <typename T>
class Tape {
 public:
  // Maps the upstream gradient to one gradient per recorded input (inputs
  // that are untracked may receive an empty tensor).
  using Backward = std::function<std::vector<BasicTensor<T>>(const BasicTensor<T>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(BasicTensor<T> value);
  Var<T> record(BasicTensor<T> value, const std::vector<Var<T>>& inputs, Backward backward);

  std::size_t size() const { return nodes_.size(); }

  // d(output)/d(wrt). output must be a single-element var. A wrt that is not
  // reachable from output (or not on this tape) gets an all-zero gradient.
  BasicTensor<T> grad(const Var<T>& output, const Var<T>& wrt) const;
  std::vector<BasicTensor<T>> grad(const Var<T>& output, std::span<const Var<T>> wrt) const;

 private:
  static constexpr std::size_t kUntracked = static_cast<std::size_t>(-1);
  struct Node {
    Shape shape;
    std::vector<std::size_t> parents;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

template <typename T>
BasicTensor<T> grad(const Tape<T>& tape, const Var<T>& output, const Var<T>& wrt) {
  return tape.grad(output, wrt);
}

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
template <typename T>
BasicTensor<T> finite_difference_gradient(const std::function<T(const BasicTensor<T>&)>& f,
                                          const BasicTensor<T>& x, T eps);

// Projection weights for multi-head attention. Each w* is [D, D] and each b*
// is [D]; head h owns columns [h*D/heads, (h+1)*D/heads) of wq/wk/wv.
template <class H>
struct AttentionWeights {
  H wq, bq, wk, bk, wv, bv, wo, bo;

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    f("wq", s.wq...);
    f("bq", s.bq...);
    f("wk", s.wk...);
    f("bk", s.bk...);
    f("wv", s.wv...);
    f("bv", s.bv...);
    f("wo", s.wo...);
    f("bo", s.bo...);
  }
};

namespace ag {

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> transpose(const Var<T>& x);
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias = {});
template <typename T>
Var<T> softmax(const Var<T>& x, int axis = -1);
template <typename T>
Var<T> sigmoid(const Var<T>& x);
template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& x, T factor);
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis);
template <typename T>
Var<T> slice(const Var<T>& x, int axis, std::size_t start, std::size_t length);
template <typename T>
Var<T> mean(const Var<T>& x, int axis);
template <typename T>
Var<T> sum_all(const Var<T>& x);
template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);
template <typename T>
Var<T> broadcast_to(const Var<T>& x, Shape shape);
template <typename T>
Var<T> dwconv1d(const Var<T>& x, const Var<T>& kernel);

template <typename T>
struct AttentionResult {
  Var<T> output;                // [B, Lq, D] after the output projection
  Var<T> attended;              // [B, Lq, D] concatenated heads before it
  std::vector<Var<T>> weights;  // per head, [B, Lq, Lk], rows sum to 1
};

// Scaled dot-product attention per head: softmax(Q_h K_h^T / sqrt(D/heads)) V_h.
// Throws ConfigError when D is not divisible by heads.
template <typename T>
AttentionResult<T> multi_head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                                        const AttentionWeights<Var<T>>& weights,
                                        std::size_t heads);

}  // namespace ag

// Untracked convenience form.
template <typename T>
ag::AttentionResult<T> multi_head_attention(const BasicTensor<T>& q, const BasicTensor<T>& k,
                                            const BasicTensor<T>& v,
                                            const AttentionWeights<BasicTensor<T>>& weights,
                                            std::size_t heads);

template <typename T>
AttentionWeights<BasicTensor<T>> init_attention_weights(std::size_t d_model, std::uint64_t seed,
                                                        T stddev);

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mvx
