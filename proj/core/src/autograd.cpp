#include "mvx/autograd.hpp"

#include <cmath>

#include "mvx/error.hpp"
#include "mvx/ops.hpp"
#include "mvx/rng.hpp"

namespace mvx {

template <typename T>
Var<T> Tape<T>::leaf(BasicTensor<T> value) {
  Var<T> v(std::move(value));
  v.tape_ = this;
  v.id_ = nodes_.size();
  nodes_.push_back(Node{v.shape(), {}, nullptr});
  return v;
}

template <typename T>
Var<T> Tape<T>::record(BasicTensor<T> value, const std::vector<Var<T>>& inputs, Backward backward) {
  Node node{value.shape(), {}, std::move(backward)};
  node.parents.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.tape_ != nullptr && in.tape_ != this) {
      throw ConfigError("operation mixes vars from two different tapes");
    }
    node.parents.push_back(in.tape_ ? in.id_ : kUntracked);
  }
  Var<T> v(std::move(value));
  v.tape_ = this;
  v.id_ = nodes_.size();
  nodes_.push_back(std::move(node));
  return v;
}

template <typename T>
std::vector<BasicTensor<T>> Tape<T>::grad(const Var<T>& output,
                                          std::span<const Var<T>> wrt) const {
  std::vector<BasicTensor<T>> result;
  result.reserve(wrt.size());
  if (output.value().size() != 1) {
    throw DimensionError("grad needs a single-element output, got " + shape_str(output.shape()));
  }
  if (output.tape_ != this) {
    for (const auto& w : wrt) result.push_back(BasicTensor<T>::zeros(w.shape()));
    return result;
  }
  std::vector<BasicTensor<T>> acc(output.id_ + 1);
  acc[output.id_] = BasicTensor<T>::full(output.shape(), T(1));
  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (acc[i].empty() || !node.backward) continue;
    auto grads = node.backward(acc[i]);
    for (std::size_t p = 0; p < node.parents.size(); ++p) {
      const std::size_t parent = node.parents[p];
      if (parent == kUntracked || p >= grads.size() || grads[p].empty()) continue;
      if (acc[parent].empty()) {
        acc[parent] = grads[p];
      } else {
        auto dst = acc[parent].mutable_data();
        auto src = grads[p].data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
    }
  }
  for (const auto& w : wrt) {
    if (w.tape_ == this && w.id_ < acc.size() && !acc[w.id_].empty()) {
      result.push_back(acc[w.id_]);
    } else {
      result.push_back(BasicTensor<T>::zeros(w.shape()));
    }
  }
  return result;
}

template <typename T>
BasicTensor<T> Tape<T>::grad(const Var<T>& output, const Var<T>& wrt) const {
  return grad(output, std::span<const Var<T>>(&wrt, 1)).front();
}

template <typename T>
BasicTensor<T> finite_difference_gradient(const std::function<T(const BasicTensor<T>&)>& f,
                                          const BasicTensor<T>& x, T eps) {
  BasicTensor<T> g(x.shape());
  auto out = g.mutable_data();
  BasicTensor<T> probe = x.clone();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T orig = x.data()[i];
    probe.mutable_data()[i] = orig + eps;
    const T hi = f(probe);
    probe.mutable_data()[i] = orig - eps;
    const T lo = f(probe);
    probe.mutable_data()[i] = orig;
    out[i] = (hi - lo) / (T(2) * eps);
  }
  return g;
}

namespace ag {
namespace {

template <typename T>
Tape<T>* tape_of(std::initializer_list<const Var<T>*> vars) {
  for (const auto* v : vars)
    if (v->tracked()) return v->tape();
  return nullptr;
}

template <typename T>
BasicTensor<T> embed_slice(const BasicTensor<T>& g, const Shape& full, int axis, std::size_t start) {
  const std::size_t ax = static_cast<std::size_t>(axis < 0 ? axis + static_cast<int>(full.size()) : axis);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= full[i];
  for (std::size_t i = ax + 1; i < full.size(); ++i) inner *= full[i];
  BasicTensor<T> out(full);
  auto o = out.mutable_data();
  auto in = g.data();
  const std::size_t len = g.shape()[ax];
  for (std::size_t a = 0; a < outer; ++a)
    for (std::size_t i = 0; i < len * inner; ++i)
      o[(a * full[ax] + start) * inner + i] = in[a * len * inner + i];
  return out;
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  auto value = ops::matmul(a.value(), b.value());
  Tape<T>* tape = tape_of<T>({&a, &b});
  if (!tape) return value;
  const auto av = a.value();
  const auto bv = b.value();
  return tape->record(std::move(value), {a, b}, [av, bv](const BasicTensor<T>& g) {
    std::vector<BasicTensor<T>> out(2);
    out[0] = ops::reduce_to_shape(ops::matmul(g, ops::transpose(bv)), av.shape());
    if (bv.rank() == 2 && av.rank() > 2) {
      const std::size_t k = av.dim(-1), n = g.dim(-1);
      const auto a2 = av.reshape({av.size() / k, k});
      const auto g2 = g.reshape({g.size() / n, n});
      out[1] = ops::matmul(ops::transpose(a2), g2);
    } else {
      out[1] = ops::matmul(ops::transpose(av), g);
    }
    return out;
  });
}

template <typename T>
Var<T> transpose(const Var<T>& x) {
  auto value = ops::transpose(x.value());
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  return tape->record(std::move(value), {x}, [](const BasicTensor<T>& g) {
    return std::vector<BasicTensor<T>>{ops::transpose(g)};
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  auto value = ops::linear(x.value(), w.value(), bias.value());
  Tape<T>* tape = tape_of<T>({&x, &w, &bias});
  if (!tape) return value;
  const auto xv = x.value();
  const auto wv = w.value();
  const bool has_bias = !bias.empty();
  std::vector<Var<T>> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return tape->record(std::move(value), inputs, [xv, wv, has_bias](const BasicTensor<T>& g) {
    const std::size_t d_in = wv.dim(0), d_out = wv.dim(1);
    std::vector<BasicTensor<T>> out;
    out.push_back(ops::linear(g, ops::transpose(wv)));
    const auto x2 = xv.reshape({xv.size() / d_in, d_in});
    const auto g2 = g.reshape({g.size() / d_out, d_out});
    out.push_back(ops::matmul(ops::transpose(x2), g2));
    if (has_bias) out.push_back(ops::sum(g2, 0));
    return out;
  });
}

template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
  auto value = ops::softmax(x.value(), axis);
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  const auto y = value;
  return tape->record(std::move(value), {x}, [y, axis](const BasicTensor<T>& g) {
    // A negative axis re-inserts from the back, matching the reduced position.
    const auto dot = ops::unsqueeze(ops::sum(ops::mul(g, y), axis), axis);
    return std::vector<BasicTensor<T>>{ops::mul(y, ops::sub(g, dot))};
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  auto value = ops::sigmoid(x.value());
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  const auto y = value;
  return tape->record(std::move(value), {x}, [y](const BasicTensor<T>& g) {
    BasicTensor<T> out(g.shape());
    auto o = out.mutable_data();
    auto gy = g.data();
    auto yy = y.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = gy[i] * yy[i] * (T(1) - yy[i]);
    return std::vector<BasicTensor<T>>{out};
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  auto value = ops::relu(x.value());
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  const auto xv = x.value();
  return tape->record(std::move(value), {x}, [xv](const BasicTensor<T>& g) {
    BasicTensor<T> out(g.shape());
    auto o = out.mutable_data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv.data()[i] > T(0) ? g.data()[i] : T(0);
    return std::vector<BasicTensor<T>>{out};
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  auto value = ops::add(a.value(), b.value());
  Tape<T>* tape = tape_of<T>({&a, &b});
  if (!tape) return value;
  const Shape sa = a.shape(), sb = b.shape();
  return tape->record(std::move(value), {a, b}, [sa, sb](const BasicTensor<T>& g) {
    return std::vector<BasicTensor<T>>{ops::reduce_to_shape(g, sa), ops::reduce_to_shape(g, sb)};
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  auto value = ops::sub(a.value(), b.value());
  Tape<T>* tape = tape_of<T>({&a, &b});
  if (!tape) return value;
  const Shape sa = a.shape(), sb = b.shape();
  return tape->record(std::move(value), {a, b}, [sa, sb](const BasicTensor<T>& g) {
    return std::vector<BasicTensor<T>>{ops::reduce_to_shape(g, sa),
                                       ops::reduce_to_shape(ops::scale(g, T(-1)), sb)};
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  auto value = ops::mul(a.value(), b.value());
  Tape<T>* tape = tape_of<T>({&a, &b});
  if (!tape) return value;
  const auto av = a.value();
  const auto bv = b.value();
  return tape->record(std::move(value), {a, b}, [av, bv](const BasicTensor<T>& g) {
    return std::vector<BasicTensor<T>>{ops::reduce_to_shape(ops::mul(g, bv), av.shape()),
                                       ops::reduce_to_shape(ops::mul(g, av), bv.shape())};
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  auto value = ops::scale(x.value(), factor);
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  return tape->record(std::move(value), {x}, [factor](const BasicTensor<T>& g) {
    return std::vector<BasicTensor<T>>{ops::scale(g, factor)};
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
  std::vector<BasicTensor<T>> values;
  values.reserve(parts.size());
  Tape<T>* tape = nullptr;
  for (const auto& p : parts) {
    values.push_back(p.value());
    if (p.tracked()) tape = p.tape();
  }
  auto value = ops::concat(std::span<const BasicTensor<T>>(values), axis);
  if (!tape) return value;
  std::vector<std::size_t> lengths;
  for (const auto& v : values) lengths.push_back(v.dim(axis));
  return tape->record(std::move(value), parts, [lengths, axis](const BasicTensor<T>& g) {
    std::vector<BasicTensor<T>> out;
    std::size_t start = 0;
    for (auto len : lengths) {
      out.push_back(ops::slice(g, axis, start, len));
      start += len;
    }
    return out;
  });
}

template <typename T>
Var<T> slice(const Var<T>& x, int axis, std::size_t start, std::size_t length) {
  auto value = ops::slice(x.value(), axis, start, length);
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  const Shape full = x.shape();
  return tape->record(std::move(value), {x}, [full, axis, start](const BasicTensor<T>& g) {
    return std::vector<BasicTensor<T>>{embed_slice(g, full, axis, start)};
  });
}

template <typename T>
Var<T> mean(const Var<T>& x, int axis) {
  auto value = ops::mean(x.value(), axis);
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  const Shape full = x.shape();
  const std::size_t n = x.dim(axis);
  return tape->record(std::move(value), {x}, [full, axis, n](const BasicTensor<T>& g) {
    const int r = static_cast<int>(full.size());
    const auto expanded = ops::unsqueeze(g, axis < 0 ? axis + r : axis);
    return std::vector<BasicTensor<T>>{
        ops::add(BasicTensor<T>::zeros(full), ops::scale(expanded, T(1) / static_cast<T>(n)))};
  });
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  auto value = ops::sum_all(x.value());
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  const Shape full = x.shape();
  return tape->record(std::move(value), {x}, [full](const BasicTensor<T>& g) {
    return std::vector<BasicTensor<T>>{BasicTensor<T>::full(full, g.item())};
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  auto value = x.value().reshape(std::move(shape));
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  const Shape full = x.shape();
  return tape->record(std::move(value), {x}, [full](const BasicTensor<T>& g) {
    return std::vector<BasicTensor<T>>{g.reshape(full)};
  });
}

template <typename T>
Var<T> broadcast_to(const Var<T>& x, Shape shape) {
  auto value = ops::add(BasicTensor<T>::zeros(shape), x.value());
  if (value.shape() != shape) {
    throw DimensionError("cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tape<T>* tape = tape_of<T>({&x});
  if (!tape) return value;
  const Shape src = x.shape();
  return tape->record(std::move(value), {x}, [src](const BasicTensor<T>& g) {
    return std::vector<BasicTensor<T>>{ops::reduce_to_shape(g, src)};
  });
}

template <typename T>
Var<T> dwconv1d(const Var<T>& x, const Var<T>& kernel) {
  auto value = ops::dwconv1d(x.value(), kernel.value());
  Tape<T>* tape = tape_of<T>({&x, &kernel});
  if (!tape) return value;
  const auto xv = x.value();
  const auto kv = kernel.value();
  return tape->record(std::move(value), {x, kernel}, [xv, kv](const BasicTensor<T>& g) {
    const std::size_t B = xv.dim(0), L = xv.dim(1), D = xv.dim(2), k = kv.dim(0);
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
    BasicTensor<T> gx(xv.shape());
    BasicTensor<T> gk(kv.shape());
    auto ox = gx.mutable_data();
    auto ok = gk.mutable_data();
    auto gg = g.data();
    auto xx = xv.data();
    auto ww = kv.data();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + j) - half;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
          const std::size_t s = static_cast<std::size_t>(src);
          for (std::size_t d = 0; d < D; ++d) {
            const T gv = gg[(b * L + l) * D + d];
            ox[(b * L + s) * D + d] += gv * ww[j * D + d];
            ok[j * D + d] += gv * xx[(b * L + s) * D + d];
          }
        }
    return std::vector<BasicTensor<T>>{gx, gk};
  });
}

template <typename T>
AttentionResult<T> multi_head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                                        const AttentionWeights<Var<T>>& w, std::size_t heads) {
  if (q.value().rank() != 3 || k.value().rank() != 3 || v.value().rank() != 3) {
    throw DimensionError("attention expects rank-3 Q/K/V, got " + shape_str(q.shape()) + ", " +
                         shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const std::size_t d = q.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("model dim " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (k.dim(1) == 0 || k.dim(1) != v.dim(1) || k.dim(0) != q.dim(0) || v.dim(0) != q.dim(0) ||
      k.dim(2) != d || v.dim(2) != d) {
    throw DimensionError("attention shape mismatch: Q " + shape_str(q.shape()) + ", K " +
                         shape_str(k.shape()) + ", V " + shape_str(v.shape()));
  }
  const std::size_t head_dim = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(head_dim));
  const auto qp = linear(q, w.wq, w.bq);
  const auto kp = linear(k, w.wk, w.bk);
  const auto vp = linear(v, w.wv, w.bv);

  AttentionResult<T> result;
  std::vector<Var<T>> per_head;
  per_head.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto qh = heads == 1 ? qp : slice(qp, -1, h * head_dim, head_dim);
    const auto kh = heads == 1 ? kp : slice(kp, -1, h * head_dim, head_dim);
    const auto vh = heads == 1 ? vp : slice(vp, -1, h * head_dim, head_dim);
    const auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    auto attn = softmax(scores, -1);
    per_head.push_back(matmul(attn, vh));
    result.weights.push_back(std::move(attn));
  }
  result.attended = heads == 1 ? per_head.front() : concat(per_head, -1);
  result.output = linear(result.attended, w.wo, w.bo);
  return result;
}

}  // namespace ag

template <typename T>
ag::AttentionResult<T> multi_head_attention(const BasicTensor<T>& q, const BasicTensor<T>& k,
                                            const BasicTensor<T>& v,
                                            const AttentionWeights<BasicTensor<T>>& weights,
                                            std::size_t heads) {
  AttentionWeights<Var<T>> vars;
  AttentionWeights<Var<T>>::visit([](const char*, Var<T>& dst, const BasicTensor<T>& src) { dst = src; },
                                  vars, weights);
  return ag::multi_head_attention<T>(Var<T>(q), Var<T>(k), Var<T>(v), vars, heads);
}

template <typename T>
AttentionWeights<BasicTensor<T>> init_attention_weights(std::size_t d_model, std::uint64_t seed,
                                                        T stddev) {
  Rng rng(seed);
  AttentionWeights<BasicTensor<T>> w;
  AttentionWeights<BasicTensor<T>>::visit(
      [&](const char* name, BasicTensor<T>& t) {
        const bool is_bias = name[0] == 'b';
        t = is_bias ? BasicTensor<T>({d_model}) : BasicTensor<T>({d_model, d_model});
        if (!is_bias) {
          for (auto& x : t.mutable_data()) x = static_cast<T>(rng.normal()) * stddev;
        }
      },
      w);
  return w;
}

template class Tape<float>;
template class Tape<double>;

#define MVX_INSTANTIATE_AG(T)                                                                     \
  template BasicTensor<T> finite_difference_gradient(                                             \
      const std::function<T(const BasicTensor<T>&)>&, const BasicTensor<T>&, T);                  \
  template ag::AttentionResult<T> multi_head_attention(                                           \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,                        \
      const AttentionWeights<BasicTensor<T>>&, std::size_t);                                      \
  template AttentionWeights<BasicTensor<T>> init_attention_weights(std::size_t, std::uint64_t, T); \
  namespace ag {                                                                                  \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                           \
  template Var<T> transpose(const Var<T>&);                                                       \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                            \
  template Var<T> softmax(const Var<T>&, int);                                                    \
  template Var<T> sigmoid(const Var<T>&);                                                         \
  template Var<T> relu(const Var<T>&);                                                            \
  template Var<T> add(const Var<T>&, const Var<T>&);                                              \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                              \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                              \
  template Var<T> scale(const Var<T>&, T);                                                        \
  template Var<T> concat(const std::vector<Var<T>>&, int);                                        \
  template Var<T> slice(const Var<T>&, int, std::size_t, std::size_t);                            \
  template Var<T> mean(const Var<T>&, int);                                                       \
  template Var<T> sum_all(const Var<T>&);                                                         \
  template Var<T> reshape(const Var<T>&, Shape);                                                  \
  template Var<T> broadcast_to(const Var<T>&, Shape);                                             \
  template Var<T> dwconv1d(const Var<T>&, const Var<T>&);                                         \
  template AttentionResult<T> multi_head_attention(const Var<T>&, const Var<T>&, const Var<T>&,   \
                                                   const AttentionWeights<Var<T>>&, std::size_t); \
  }

MVX_INSTANTIATE_AG(float)
MVX_INSTANTIATE_AG(double)

}  // namespace mvx
