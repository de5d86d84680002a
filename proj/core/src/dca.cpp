#include "mvx/dca.hpp"

#include <cmath>

#include "mvx/error.hpp"
#include "mvx/rng.hpp"

namespace mvx {

void validate_dims(const DcaDims& d) {
  if (d.n_native == 0 || d.n_aligned == 0 || d.d_enc == 0 || d.d_model == 0) {
    throw ConfigError("DCA dims must be positive");
  }
  if (d.heads_spatial == 0 || d.d_model % d.heads_spatial != 0) {
    throw ConfigError("spatial heads " + std::to_string(d.heads_spatial) + " do not divide d_model " +
                      std::to_string(d.d_model));
  }
  if (d.heads_channel == 0 || d.n_aligned % d.heads_channel != 0) {
    throw ConfigError("channel heads " + std::to_string(d.heads_channel) +
                      " do not divide n_aligned " + std::to_string(d.n_aligned));
  }
}

std::string ModalityMask::label() const {
  std::string out;
  auto add = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(rgb, "RGB");
  add(depth, "Depth");
  add(event, "Event");
  add(lidar, "LiDAR");
  return out.empty() ? "none" : out;
}

namespace {

void expect_shape(const std::string& name, const Shape& got, const Shape& want) {
  if (got != want) {
    throw ConfigError("parameter " + name + " has shape " + shape_str(got) + ", expected " +
                      shape_str(want));
  }
}

template <typename T>
void check_attention(const std::string& prefix, const AttentionWeights<BasicTensor<T>>& w,
                     std::size_t d) {
  AttentionWeights<BasicTensor<T>>::visit(
      [&](const char* name, const BasicTensor<T>& t) {
        const bool bias = name[0] == 'b';
        expect_shape(prefix + name, t.shape(), bias ? Shape{d} : Shape{d, d});
      },
      w);
}

template <typename T>
BasicTensor<T> normal_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sd) {
  BasicTensor<T> w({rows, cols});
  for (auto& x : w.mutable_data()) x = static_cast<T>(rng.normal() * sd);
  return w;
}

}  // namespace

template <typename T>
DcaParams<T>::DcaParams(DcaDims dims, DcaWeights<BasicTensor<T>> weights)
    : dims_(dims), weights_(std::move(weights)) {
  validate_dims(dims_);
  for (const auto* m : {&weights_.rgb, &weights_.depth, &weights_.event}) {
    expect_shape("feature_proj", m->feature_proj.shape(), {dims_.d_enc, dims_.d_model});
    expect_shape("token_mix", m->token_mix.shape(), {dims_.n_native, dims_.n_aligned});
  }
  check_attention<T>("spatial.", weights_.spatial, dims_.d_model);
  check_attention<T>("channel.", weights_.channel, dims_.n_aligned);
  expect_shape("channel_align", weights_.channel_align.shape(),
               {2 * dims_.n_aligned, dims_.n_aligned});
}

template <typename T>
DcaParams<T> DcaParams<T>::init(const DcaDims& dims, std::uint64_t seed) {
  validate_dims(dims);
  Rng rng(seed);
  DcaWeights<BasicTensor<T>> w;
  for (auto* m : {&w.rgb, &w.depth, &w.event}) {
    m->feature_proj = normal_matrix<T>(rng, dims.d_enc, dims.d_model, 1.0 / std::sqrt(double(dims.d_enc)));
    m->token_mix = normal_matrix<T>(rng, dims.n_native, dims.n_aligned, 1.0 / std::sqrt(double(dims.n_native)));
  }
  w.spatial = init_attention_weights<T>(dims.d_model, derive_seed(seed, 1),
                                        static_cast<T>(1.0 / std::sqrt(double(dims.d_model))));
  w.channel = init_attention_weights<T>(dims.n_aligned, derive_seed(seed, 2),
                                        static_cast<T>(1.0 / std::sqrt(double(dims.n_aligned))));
  w.channel_align = normal_matrix<T>(rng, 2 * dims.n_aligned, dims.n_aligned,
                                     1.0 / std::sqrt(double(2 * dims.n_aligned)));
  return DcaParams(dims, std::move(w));
}

template <typename T>
DcaWeights<Var<T>> as_constants(const DcaWeights<BasicTensor<T>>& weights) {
  DcaWeights<Var<T>> out;
  DcaWeights<Var<T>>::visit([](const char*, Var<T>& dst, const BasicTensor<T>& src) { dst = src; },
                            out, weights);
  return out;
}

template <typename T>
DcaWeights<Var<T>> as_leaves(Tape<T>& tape, const DcaWeights<BasicTensor<T>>& weights) {
  DcaWeights<Var<T>> out;
  DcaWeights<Var<T>>::visit(
      [&tape](const char*, Var<T>& dst, const BasicTensor<T>& src) { dst = tape.leaf(src); }, out,
      weights);
  return out;
}

namespace dca {

template <typename T>
Var<T> align_tokens(const Var<T>& grid, const ModalityAlignment<Var<T>>& w, const DcaDims& dims) {
  if (grid.value().rank() != 3 || grid.dim(1) != dims.n_native || grid.dim(2) != dims.d_enc) {
    throw DimensionError("align_tokens expects [B, " + std::to_string(dims.n_native) + ", " +
                         std::to_string(dims.d_enc) + "], got " + shape_str(grid.shape()));
  }
  const auto projected = ag::linear(grid, w.feature_proj);            // [B, n_native, D]
  const auto mixed = ag::linear(ag::transpose(projected), w.token_mix);  // [B, D, n_aligned]
  return ag::transpose(mixed);
}

template <typename T>
ag::AttentionResult<T> spatial_cross_attention(const Var<T>& rgb, const Var<T>& depth,
                                               const Var<T>& event,
                                               const AttentionWeights<Var<T>>& weights,
                                               std::size_t heads) {
  if (rgb.shape() != depth.shape() || rgb.shape() != event.shape()) {
    throw DimensionError("spatial attention needs equally shaped aligned grids, got " +
                         shape_str(rgb.shape()) + ", " + shape_str(depth.shape()) + ", " +
                         shape_str(event.shape()));
  }
  const auto kv = ag::concat<T>({depth, event}, 1);
  return ag::multi_head_attention(rgb, kv, kv, weights, heads);
}

template <typename T>
ag::AttentionResult<T> channel_cross_attention(const Var<T>& rgb, const Var<T>& depth,
                                               const Var<T>& event,
                                               const AttentionWeights<Var<T>>& weights,
                                               const Var<T>& channel_align, std::size_t heads,
                                               Var<T>* q_out, Var<T>* k_out) {
  if (rgb.shape() != depth.shape() || rgb.shape() != event.shape()) {
    throw DimensionError("channel attention needs equally shaped aligned grids, got " +
                         shape_str(rgb.shape()) + ", " + shape_str(depth.shape()) + ", " +
                         shape_str(event.shape()));
  }
  const auto q = ag::transpose(rgb);                                   // [B, D, N]
  const auto kv = ag::transpose(ag::concat<T>({depth, event}, 1));     // [B, D, 2N]
  const auto k = ag::linear(kv, channel_align);                        // [B, D, N]
  if (q_out) *q_out = q;
  if (k_out) *k_out = k;
  return ag::multi_head_attention(q, k, k, weights, heads);
}

template <typename T>
Var<T> fuse(const Var<T>& spatial, const Var<T>& channel) {
  const auto& s = spatial.shape();
  const auto& c = channel.shape();
  if (s.size() != 3 || c.size() != 3 || s[0] != c[0] || s[1] != c[2] || s[2] != c[1]) {
    throw DimensionError("fuse expects [B, N, D] and [B, D, N], got " + shape_str(s) + " and " +
                         shape_str(c));
  }
  return ag::scale(ag::add(spatial, ag::transpose(channel)), T(0.5));
}

template <typename T>
DcaTrace<T> forward(const DcaInputs<T>& inputs, const ModalityMask& mask,
                    const DcaWeights<Var<T>>& w, const DcaDims& dims, const PathwayMask& pathways) {
  if (!mask.any_camera()) {
    throw ConfigError("DCA needs at least one of RGB, depth, event");
  }
  if (!pathways.spatial && !pathways.channel) {
    throw ConfigError("disabling both spatial and channel attention leaves nothing to fuse");
  }
  const BasicTensor<T>* reference = nullptr;
  for (const auto& [on, grid] : {std::pair{mask.rgb, &inputs.rgb}, std::pair{mask.depth, &inputs.depth},
                                 std::pair{mask.event, &inputs.event}}) {
    if (on) {
      if (grid->empty()) throw InputError("active modality has an empty grid");
      if (!reference) reference = grid;
    }
  }
  const Shape in_shape = reference->shape();
  auto grid_or_zero = [&](bool on, const BasicTensor<T>& g) -> Var<T> {
    if (!on) return BasicTensor<T>::zeros(in_shape);
    if (g.shape() != in_shape) {
      throw DimensionError("modality grids differ in shape: " + shape_str(g.shape()) + " vs " +
                           shape_str(in_shape));
    }
    return g;
  };

  DcaTrace<T> t;
  t.rgb = align_tokens(grid_or_zero(mask.rgb, inputs.rgb), w.rgb, dims);
  t.depth = align_tokens(grid_or_zero(mask.depth, inputs.depth), w.depth, dims);
  t.event = align_tokens(grid_or_zero(mask.event, inputs.event), w.event, dims);
  t.k_multi = ag::concat<T>({t.depth, t.event}, 1);
  const std::size_t B = in_shape[0];

  if (pathways.spatial) {
    auto s = spatial_cross_attention(t.rgb, t.depth, t.event, w.spatial, dims.heads_spatial);
    t.spatial = s.output;
    t.spatial_attended = s.attended;
  } else {
    t.spatial = BasicTensor<T>::zeros({B, dims.n_aligned, dims.d_model});
  }
  if (pathways.channel) {
    auto c = channel_cross_attention(t.rgb, t.depth, t.event, w.channel, w.channel_align,
                                     dims.heads_channel, &t.q_channel, &t.k_channel);
    t.channel = c.output;
  } else {
    t.channel = BasicTensor<T>::zeros({B, dims.d_model, dims.n_aligned});
  }
  t.fused = fuse(t.spatial, t.channel);
  return t;
}

}  // namespace dca

template <typename T>
BasicTensor<T> align_tokens(const BasicTensor<T>& grid, Modality modality, const DcaParams<T>& params) {
  const auto& w = params.weights();
  const ModalityAlignment<BasicTensor<T>>* src = nullptr;
  switch (modality) {
    case Modality::Rgb: src = &w.rgb; break;
    case Modality::Depth: src = &w.depth; break;
    case Modality::Event: src = &w.event; break;
    case Modality::Lidar: throw ConfigError("LiDAR does not pass through token alignment");
  }
  ModalityAlignment<Var<T>> vars{src->feature_proj, src->token_mix};
  return dca::align_tokens(Var<T>(grid), vars, params.dims()).value();
}

template <typename T>
BasicTensor<T> fuse(const BasicTensor<T>& spatial, const BasicTensor<T>& channel) {
  return dca::fuse(Var<T>(spatial), Var<T>(channel)).value();
}

template <typename T>
DcaTrace<T> dca_forward(const DcaInputs<T>& inputs, const ModalityMask& mask,
                        const DcaParams<T>& params, const PathwayMask& pathways) {
  return dca::forward(inputs, mask, as_constants(params.weights()), params.dims(), pathways);
}

#define MVX_INSTANTIATE_DCA(T)                                                                    \
  template class DcaParams<T>;                                                                    \
  template DcaWeights<Var<T>> as_constants(const DcaWeights<BasicTensor<T>>&);                    \
  template DcaWeights<Var<T>> as_leaves(Tape<T>&, const DcaWeights<BasicTensor<T>>&);             \
  template BasicTensor<T> align_tokens(const BasicTensor<T>&, Modality, const DcaParams<T>&);     \
  template BasicTensor<T> fuse(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template DcaTrace<T> dca_forward(const DcaInputs<T>&, const ModalityMask&, const DcaParams<T>&, \
                                   const PathwayMask&);                                           \
  namespace dca {                                                                                 \
  template Var<T> align_tokens(const Var<T>&, const ModalityAlignment<Var<T>>&, const DcaDims&);  \
  template ag::AttentionResult<T> spatial_cross_attention(                                        \
      const Var<T>&, const Var<T>&, const Var<T>&, const AttentionWeights<Var<T>>&, std::size_t); \
  template ag::AttentionResult<T> channel_cross_attention(                                        \
      const Var<T>&, const Var<T>&, const Var<T>&, const AttentionWeights<Var<T>>&,               \
      const Var<T>&, std::size_t, Var<T>*, Var<T>*);                                              \
  template Var<T> fuse(const Var<T>&, const Var<T>&);                                             \
  template DcaTrace<T> forward(const DcaInputs<T>&, const ModalityMask&,                          \
                               const DcaWeights<Var<T>>&, const DcaDims&, const PathwayMask&);    \
  }

MVX_INSTANTIATE_DCA(float)
MVX_INSTANTIATE_DCA(double)

}  // namespace mvx
