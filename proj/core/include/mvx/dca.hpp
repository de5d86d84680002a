#pragma once

#include <cstdint>
#include <string>

#include "mvx/autograd.hpp"
#include "mvx/encoders.hpp"

namespace mvx {

struct DcaDims {
  std::size_t n_native = 49;     // encoder tokens (7x7 grid)
  std::size_t n_aligned = 48;    // tokens after alignment
  std::size_t d_enc = 512;       // encoder feature width
  std::size_t d_model = 512;     // fused feature width
  std::size_t heads_spatial = 8;
  std::size_t heads_channel = 4;

  std::size_t head_dim_spatial() const { return d_model / heads_spatial; }
  std::size_t head_dim_channel() const { return n_aligned / heads_channel; }
};

// Throws ConfigError unless heads divide their attention widths.
void validate_dims(const DcaDims& dims);

// Per-modality alignment as two factored maps: a per-token feature projection
// [d_enc, d_model] followed by token-axis mixing [n_native, n_aligned].
template <class H>
struct ModalityAlignment {
  H feature_proj, token_mix;

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    f("feature_proj", s.feature_proj...);
    f("token_mix", s.token_mix...);
  }
};

template <class H>
struct DcaWeights {
  ModalityAlignment<H> rgb, depth, event;
  AttentionWeights<H> spatial;  // d_model x d_model projections
  AttentionWeights<H> channel;  // n_aligned x n_aligned projections
  H channel_align;              // [2 n_aligned, n_aligned]

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    auto prefixed = [&f](const char* prefix) {
      return [&f, prefix](const char* name, auto&... t) {
        f((std::string(prefix) + name).c_str(), t...);
      };
    };
    ModalityAlignment<H>::visit(prefixed("rgb."), s.rgb...);
    ModalityAlignment<H>::visit(prefixed("depth."), s.depth...);
    ModalityAlignment<H>::visit(prefixed("event."), s.event...);
    AttentionWeights<H>::visit(prefixed("spatial."), s.spatial...);
    AttentionWeights<H>::visit(prefixed("channel."), s.channel...);
    f("channel_align", s.channel_align...);
  }
};

// Availability of each sensor for one run.
struct ModalityMask {
  bool rgb = true;
  bool depth = true;
  bool event = true;
  bool lidar = true;

  bool any_camera() const { return rgb || depth || event; }
  std::string label() const;  // e.g. "RGB+Depth+LiDAR"
  bool operator==(const ModalityMask&) const = default;
};

// Which DCA pathways contribute to the fused output. A disabled pathway
// contributes zeros to the average.
struct PathwayMask {
  bool spatial = true;
  bool channel = true;
  bool operator==(const PathwayMask&) const = default;
};

template <typename T>
class DcaParams {
 public:
  // Validates dims and every weight shape; throws ConfigError.
  DcaParams(DcaDims dims, DcaWeights<BasicTensor<T>> weights);

  static DcaParams init(const DcaDims& dims, std::uint64_t seed);

  const DcaDims& dims() const { return dims_; }
  const DcaWeights<BasicTensor<T>>& weights() const { return weights_; }

 private:
  DcaDims dims_;
  DcaWeights<BasicTensor<T>> weights_;
};

// Raw encoder grids for one batch, each [B, n_native, d_enc]. Grids of
// masked modalities may be left empty.
template <typename T>
struct DcaInputs {
  BasicTensor<T> rgb, depth, event;
};

template <typename T>
struct DcaTrace {
  Var<T> rgb, depth, event;  // aligned grids [B, n_aligned, d_model]
  Var<T> k_multi;            // [B, 2 n_aligned, d_model]
  Var<T> q_channel;          // [B, d_model, n_aligned]
  Var<T> k_channel;          // [B, d_model, n_aligned]
  Var<T> spatial;            // F_s [B, n_aligned, d_model]
  Var<T> channel;            // F_c [B, d_model, n_aligned]
  Var<T> spatial_attended;   // spatial pathway before its output projection
  Var<T> fused;              // [B, n_aligned, d_model]
};

namespace dca {

template <typename T>
Var<T> align_tokens(const Var<T>& grid, const ModalityAlignment<Var<T>>& weights,
                    const DcaDims& dims);

// RGB tokens query the token-axis concatenation of depth and event tokens.
template <typename T>
ag::AttentionResult<T> spatial_cross_attention(const Var<T>& rgb, const Var<T>& depth,
                                               const Var<T>& event,
                                               const AttentionWeights<Var<T>>& weights,
                                               std::size_t heads);

// Attention over transposed grids: queries are RGB channels, keys/values the
// concatenated depth/event channels mapped 2N -> N by channel_align.
template <typename T>
ag::AttentionResult<T> channel_cross_attention(const Var<T>& rgb, const Var<T>& depth,
                                               const Var<T>& event,
                                               const AttentionWeights<Var<T>>& weights,
                                               const Var<T>& channel_align, std::size_t heads,
                                               Var<T>* q_out = nullptr, Var<T>* k_out = nullptr);

// (F_s + F_c^T) / 2
template <typename T>
Var<T> fuse(const Var<T>& spatial, const Var<T>& channel);

// Masked modalities enter as zero grids of the full input shape.
template <typename T>
DcaTrace<T> forward(const DcaInputs<T>& inputs, const ModalityMask& mask,
                    const DcaWeights<Var<T>>& weights, const DcaDims& dims,
                    const PathwayMask& pathways = {});

}  // namespace dca

template <typename T>
DcaWeights<Var<T>> as_constants(const DcaWeights<BasicTensor<T>>& weights);

template <typename T>
DcaWeights<Var<T>> as_leaves(Tape<T>& tape, const DcaWeights<BasicTensor<T>>& weights);

template <typename T>
BasicTensor<T> align_tokens(const BasicTensor<T>& grid, Modality modality,
                            const DcaParams<T>& params);

template <typename T>
BasicTensor<T> fuse(const BasicTensor<T>& spatial, const BasicTensor<T>& channel);

template <typename T>
DcaTrace<T> dca_forward(const DcaInputs<T>& inputs, const ModalityMask& mask,
                        const DcaParams<T>& params, const PathwayMask& pathways = {});

}  // namespace mvx
