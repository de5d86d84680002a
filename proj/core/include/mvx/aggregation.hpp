#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "mvx/autograd.hpp"

namespace mvx {

enum class AggregatorKind { Gap, QAttn, SpectralQAttn, DepthGateQAttn };

std::string_view to_string(AggregatorKind kind);
// Accepts the CLI spellings gap | qattn | spectral | depthgate.
AggregatorKind parse_aggregator(std::string_view name);

struct AggregatorConfig {
  AggregatorKind kind = AggregatorKind::QAttn;
  std::size_t d_model = 512;
  std::size_t heads = 8;
  std::size_t kernel = 3;  // spectral depthwise kernel length
};

// Fields a variant does not use stay empty.
template <class H>
struct AggregatorWeights {
  H query;                     // [1, D]
  AttentionWeights<H> attn;    // D x D projections
  H spectral_kernel;           // [k, D]
  H spectral_proj;             // [2D, D]
  H gate_w;                    // [D]
  H gate_b;                    // [1]

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    f("query", s.query...);
    auto prefixed = [&f](const char* name, auto&... t) {
      f((std::string("attn.") + name).c_str(), t...);
    };
    AttentionWeights<H>::visit(prefixed, s.attn...);
    f("spectral_kernel", s.spectral_kernel...);
    f("spectral_proj", s.spectral_proj...);
    f("gate_w", s.gate_w...);
    f("gate_b", s.gate_b...);
  }
};

template <typename T>
class AggregatorParams {
 public:
  // Validates that the variant's fields are present with the right shapes;
  // throws ConfigError.
  AggregatorParams(AggregatorConfig config, AggregatorWeights<BasicTensor<T>> weights);

  // Query drawn from N(0, 0.02^2); the rest scaled by fan-in.
  static AggregatorParams init(const AggregatorConfig& config, std::uint64_t seed);

  const AggregatorConfig& config() const { return config_; }
  const AggregatorWeights<BasicTensor<T>>& weights() const { return weights_; }

 private:
  AggregatorConfig config_;
  AggregatorWeights<BasicTensor<T>> weights_;
};

template <typename T>
AggregatorWeights<Var<T>> as_constants(const AggregatorWeights<BasicTensor<T>>& weights);
// Leaves for every non-empty field; empty fields stay empty.
template <typename T>
AggregatorWeights<Var<T>> as_leaves(Tape<T>& tape, const AggregatorWeights<BasicTensor<T>>& weights);

namespace agg {

// Mean over the token axis: [B, N, D] -> [B, D].
template <typename T>
Var<T> gap(const Var<T>& fused);

// Learnable query attends over the tokens: [B, N, D] -> [B, D].
template <typename T>
Var<T> qattn(const Var<T>& fused, const AggregatorWeights<Var<T>>& w, std::size_t heads);

// Tokens are widened with a depthwise-convolved copy along the feature axis,
// projected 2D -> D, then attended by the learnable query.
template <typename T>
Var<T> spectral_qattn(const Var<T>& fused, const AggregatorWeights<Var<T>>& w, std::size_t heads);

// Per-token gate sigmoid(depth_i . w_gate + b_gate), shape [B, N, 1].
template <typename T>
Var<T> depth_gates(const Var<T>& depth_aligned, const AggregatorWeights<Var<T>>& w);

// Attention over the gate-scaled tokens.
template <typename T>
Var<T> depthgate_qattn(const Var<T>& fused, const Var<T>& depth_aligned,
                       const AggregatorWeights<Var<T>>& w, std::size_t heads);

template <typename T>
Var<T> aggregate(const Var<T>& fused, const Var<T>& depth_aligned, const AggregatorWeights<Var<T>>& w,
                 const AggregatorConfig& config);

}  // namespace agg

template <typename T>
BasicTensor<T> gap(const BasicTensor<T>& fused);

// Dispatches on the configured variant. depth_aligned is only read by
// DepthGateQAttn.
template <typename T>
BasicTensor<T> aggregate(const BasicTensor<T>& fused, const BasicTensor<T>& depth_aligned,
                         const AggregatorParams<T>& params);

}  // namespace mvx
