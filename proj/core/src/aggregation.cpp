#include "mvx/aggregation.hpp"

#include <cmath>

#include "mvx/error.hpp"
#include "mvx/rng.hpp"

namespace mvx {

std::string_view to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::Gap: return "gap";
    case AggregatorKind::QAttn: return "qattn";
    case AggregatorKind::SpectralQAttn: return "spectral";
    case AggregatorKind::DepthGateQAttn: return "depthgate";
  }
  return "?";
}

AggregatorKind parse_aggregator(std::string_view name) {
  if (name == "gap") return AggregatorKind::Gap;
  if (name == "qattn") return AggregatorKind::QAttn;
  if (name == "spectral") return AggregatorKind::SpectralQAttn;
  if (name == "depthgate") return AggregatorKind::DepthGateQAttn;
  throw ConfigError("unknown aggregator '" + std::string(name) +
                    "' (expected gap|qattn|spectral|depthgate)");
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

template <typename T>
void require_shape(const BasicTensor<T>& t, const Shape& want, const char* name) {
  require(!t.empty(), std::string("aggregator parameter ") + name + " is missing");
  require(t.shape() == want, std::string("aggregator parameter ") + name + " has shape " +
                                 shape_str(t.shape()) + ", expected " + shape_str(want));
}

}  // namespace

template <typename T>
AggregatorParams<T>::AggregatorParams(AggregatorConfig config, AggregatorWeights<BasicTensor<T>> weights)
    : config_(config), weights_(std::move(weights)) {
  const std::size_t D = config_.d_model;
  if (config_.kind == AggregatorKind::Gap) return;
  require(config_.heads > 0 && D % config_.heads == 0,
          "aggregator heads " + std::to_string(config_.heads) + " do not divide " + std::to_string(D));
  require_shape(weights_.query, {1, D}, "query");
  AttentionWeights<BasicTensor<T>>::visit(
      [&](const char* name, const BasicTensor<T>& t) {
        require_shape(t, name[0] == 'b' ? Shape{D} : Shape{D, D}, name);
      },
      weights_.attn);
  if (config_.kind == AggregatorKind::SpectralQAttn) {
    require(config_.kernel % 2 == 1, "spectral kernel length must be odd");
    require_shape(weights_.spectral_kernel, {config_.kernel, D}, "spectral_kernel");
    require_shape(weights_.spectral_proj, {2 * D, D}, "spectral_proj");
  }
  if (config_.kind == AggregatorKind::DepthGateQAttn) {
    require_shape(weights_.gate_w, {D}, "gate_w");
    require_shape(weights_.gate_b, {1}, "gate_b");
  }
}

template <typename T>
AggregatorParams<T> AggregatorParams<T>::init(const AggregatorConfig& config, std::uint64_t seed) {
  const std::size_t D = config.d_model;
  AggregatorWeights<BasicTensor<T>> w;
  if (config.kind != AggregatorKind::Gap) {
    Rng rng(seed);
    w.query = BasicTensor<T>({1, D});
    for (auto& x : w.query.mutable_data()) x = static_cast<T>(rng.normal() * 0.02);
    w.attn = init_attention_weights<T>(D, derive_seed(seed, 1),
                                       static_cast<T>(1.0 / std::sqrt(double(D))));
    if (config.kind == AggregatorKind::SpectralQAttn) {
      w.spectral_kernel = BasicTensor<T>({config.kernel, D});
      for (auto& x : w.spectral_kernel.mutable_data())
        x = static_cast<T>(rng.normal() / std::sqrt(double(config.kernel)));
      w.spectral_proj = BasicTensor<T>({2 * D, D});
      for (auto& x : w.spectral_proj.mutable_data())
        x = static_cast<T>(rng.normal() / std::sqrt(double(2 * D)));
    }
    if (config.kind == AggregatorKind::DepthGateQAttn) {
      w.gate_w = BasicTensor<T>({D});
      for (auto& x : w.gate_w.mutable_data()) x = static_cast<T>(rng.normal() / std::sqrt(double(D)));
      w.gate_b = BasicTensor<T>({1});
    }
  }
  return AggregatorParams(config, std::move(w));
}

template <typename T>
AggregatorWeights<Var<T>> as_constants(const AggregatorWeights<BasicTensor<T>>& weights) {
  AggregatorWeights<Var<T>> out;
  AggregatorWeights<Var<T>>::visit(
      [](const char*, Var<T>& dst, const BasicTensor<T>& src) { dst = src; }, out, weights);
  return out;
}

template <typename T>
AggregatorWeights<Var<T>> as_leaves(Tape<T>& tape, const AggregatorWeights<BasicTensor<T>>& weights) {
  AggregatorWeights<Var<T>> out;
  AggregatorWeights<Var<T>>::visit(
      [&tape](const char*, Var<T>& dst, const BasicTensor<T>& src) {
        if (!src.empty()) dst = tape.leaf(src);
      },
      out, weights);
  return out;
}

namespace agg {
namespace {

template <typename T>
Var<T> query_attend(const Var<T>& tokens, const AggregatorWeights<Var<T>>& w, std::size_t heads) {
  if (w.query.empty()) throw ConfigError("aggregator has no learnable query");
  const std::size_t B = tokens.dim(0), D = tokens.dim(2);
  if (w.query.shape() != Shape{1, D}) {
    throw DimensionError("query " + shape_str(w.query.shape()) + " does not match tokens " +
                         shape_str(tokens.shape()));
  }
  const auto q = ag::broadcast_to(ag::reshape(w.query, {1, 1, D}), {B, 1, D});
  const auto out = ag::multi_head_attention(q, tokens, tokens, w.attn, heads).output;
  return ag::reshape(out, {B, D});
}

template <typename T>
void check_tokens(const Var<T>& fused) {
  if (fused.value().rank() != 3 || fused.dim(1) == 0) {
    throw DimensionError("aggregation expects [B, N >= 1, D], got " + shape_str(fused.shape()));
  }
}

}  // namespace

template <typename T>
Var<T> gap(const Var<T>& fused) {
  check_tokens(fused);
  return ag::mean(fused, 1);
}

template <typename T>
Var<T> qattn(const Var<T>& fused, const AggregatorWeights<Var<T>>& w, std::size_t heads) {
  check_tokens(fused);
  return query_attend(fused, w, heads);
}

template <typename T>
Var<T> spectral_qattn(const Var<T>& fused, const AggregatorWeights<Var<T>>& w, std::size_t heads) {
  check_tokens(fused);
  if (w.spectral_kernel.empty() || w.spectral_proj.empty()) {
    throw ConfigError("spectral aggregator is missing its kernel or projection");
  }
  const auto conv = ag::dwconv1d(fused, w.spectral_kernel);
  const auto enhanced = ag::concat<T>({fused, conv}, -1);
  return query_attend(ag::linear(enhanced, w.spectral_proj), w, heads);
}

template <typename T>
Var<T> depth_gates(const Var<T>& depth_aligned, const AggregatorWeights<Var<T>>& w) {
  if (w.gate_w.empty() || w.gate_b.empty()) throw ConfigError("depth gate parameters are missing");
  const std::size_t D = w.gate_w.dim(0);
  return ag::sigmoid(ag::linear(depth_aligned, ag::reshape(w.gate_w, {D, 1}), w.gate_b));
}

template <typename T>
Var<T> depthgate_qattn(const Var<T>& fused, const Var<T>& depth_aligned,
                       const AggregatorWeights<Var<T>>& w, std::size_t heads) {
  check_tokens(fused);
  if (depth_aligned.value().rank() != 3 || depth_aligned.dim(0) != fused.dim(0) ||
      depth_aligned.dim(1) != fused.dim(1)) {
    throw DimensionError("depth grid " + shape_str(depth_aligned.shape()) +
                         " does not match fused tokens " + shape_str(fused.shape()));
  }
  const auto gated = ag::mul(fused, depth_gates(depth_aligned, w));
  return query_attend(gated, w, heads);
}

template <typename T>
Var<T> aggregate(const Var<T>& fused, const Var<T>& depth_aligned, const AggregatorWeights<Var<T>>& w,
                 const AggregatorConfig& config) {
  switch (config.kind) {
    case AggregatorKind::Gap: return gap(fused);
    case AggregatorKind::QAttn: return qattn(fused, w, config.heads);
    case AggregatorKind::SpectralQAttn: return spectral_qattn(fused, w, config.heads);
    case AggregatorKind::DepthGateQAttn: return depthgate_qattn(fused, depth_aligned, w, config.heads);
  }
  throw ConfigError("unknown aggregator");
}

}  // namespace agg

template <typename T>
BasicTensor<T> gap(const BasicTensor<T>& fused) {
  return agg::gap(Var<T>(fused)).value();
}

template <typename T>
BasicTensor<T> aggregate(const BasicTensor<T>& fused, const BasicTensor<T>& depth_aligned,
                         const AggregatorParams<T>& params) {
  return agg::aggregate(Var<T>(fused), Var<T>(depth_aligned), as_constants(params.weights()),
                        params.config())
      .value();
}

#define MVX_INSTANTIATE_AGG(T)                                                                      \
  template class AggregatorParams<T>;                                                               \
  template AggregatorWeights<Var<T>> as_constants(const AggregatorWeights<BasicTensor<T>>&);        \
  template AggregatorWeights<Var<T>> as_leaves(Tape<T>&, const AggregatorWeights<BasicTensor<T>>&); \
  template BasicTensor<T> gap(const BasicTensor<T>&);                                               \
  template BasicTensor<T> aggregate(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                    const AggregatorParams<T>&);                                    \
  namespace agg {                                                                                   \
  template Var<T> gap(const Var<T>&);                                                               \
  template Var<T> qattn(const Var<T>&, const AggregatorWeights<Var<T>>&, std::size_t);              \
  template Var<T> spectral_qattn(const Var<T>&, const AggregatorWeights<Var<T>>&, std::size_t);     \
  template Var<T> depth_gates(const Var<T>&, const AggregatorWeights<Var<T>>&);                     \
  template Var<T> depthgate_qattn(const Var<T>&, const Var<T>&, const AggregatorWeights<Var<T>>&,   \
                                  std::size_t);                                                     \
  template Var<T> aggregate(const Var<T>&, const Var<T>&, const AggregatorWeights<Var<T>>&,         \
                            const AggregatorConfig&);                                               \
  }

MVX_INSTANTIATE_AGG(float)
MVX_INSTANTIATE_AGG(double)

}  // namespace mvx
