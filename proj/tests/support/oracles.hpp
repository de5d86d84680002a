#pragma once

// Scalar-loop reference implementations. They share no code with the library
// beyond the tensor container and are deliberately written the slow way.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mvx/aggregation.hpp"
#include "mvx/dca.hpp"
#include "mvx/encoders.hpp"
#include "mvx/rng.hpp"

namespace oracle {

using mvx::Shape;
using mvx::Tensor;

inline Tensor random_tensor(const Shape& shape, mvx::Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (auto& x : t.mutable_data()) x = scale * rng.normal();
  return t;
}

inline Tensor uniform_tensor(const Shape& shape, mvx::Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor t(shape);
  for (auto& x : t.mutable_data()) x = rng.uniform(lo, hi);
  return t;
}

// [M, K] x [K, N]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  Tensor c({M, N});
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += a.at({i, k}) * b.at({k, j});
      c.at({i, j}) = s;
    }
  return c;
}

// Rows of x (any leading shape) times w[in, out] plus optional bias.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = {}) {
  const std::size_t in = w.dim(0), out = w.dim(1), rows = x.size() / in;
  Shape shape = x.shape();
  shape.back() = out;
  Tensor y(shape);
  auto xd = x.data();
  auto wd = w.data();
  auto yd = y.mutable_data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double s = bias.empty() ? 0.0 : bias.data()[o];
      for (std::size_t i = 0; i < in; ++i) s += xd[r * in + i] * wd[i * out + o];
      yd[r * out + o] = s;
    }
  return y;
}

// [B, R, C] -> [B, C, R]
inline Tensor transpose(const Tensor& x) {
  const std::size_t B = x.dim(0), R = x.dim(1), C = x.dim(2);
  Tensor y({B, C, R});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) y.at({b, c, r}) = x.at({b, r, c});
  return y;
}

// Token-axis concatenation of two [B, N, D] tensors.
inline Tensor concat_tokens(const Tensor& a, const Tensor& b) {
  const std::size_t B = a.dim(0), Na = a.dim(1), Nb = b.dim(1), D = a.dim(2);
  Tensor y({B, Na + Nb, D});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t n = 0; n < Na; ++n) y.at({i, n, d}) = a.at({i, n, d});
      for (std::size_t n = 0; n < Nb; ++n) y.at({i, Na + n, d}) = b.at({i, n, d});
    }
  return y;
}

struct Attention {
  Tensor output;
  Tensor attended;
  std::vector<Tensor> weights;  // per head [B, Lq, Lk]
};

inline Attention attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           const mvx::AttentionWeights<Tensor>& w, std::size_t heads) {
  const std::size_t B = q.dim(0), Lq = q.dim(1), Lk = k.dim(1), D = q.dim(2), hd = D / heads;
  const Tensor Q = linear(q, w.wq, w.bq), K = linear(k, w.wk, w.bk), V = linear(v, w.wv, w.bv);
  Attention out;
  out.attended = Tensor({B, Lq, D});
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor p({B, Lq, Lk});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < Lq; ++i) {
        std::vector<double> s(Lk);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < Lk; ++j) {
          double dot = 0.0;
          for (std::size_t c = 0; c < hd; ++c) dot += Q.at({b, i, h * hd + c}) * K.at({b, j, h * hd + c});
          s[j] = dot / std::sqrt(static_cast<double>(hd));
          mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (auto& x : s) z += (x = std::exp(x - mx));
        for (std::size_t j = 0; j < Lk; ++j) p.at({b, i, j}) = s[j] / z;
        for (std::size_t c = 0; c < hd; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < Lk; ++j) acc += p.at({b, i, j}) * V.at({b, j, h * hd + c});
          out.attended.at({b, i, h * hd + c}) = acc;
        }
      }
    out.weights.push_back(p);
  }
  out.output = linear(out.attended, w.wo, w.bo);
  return out;
}

// out[b, t, d] = sum_n mix[n, t] * sum_e grid[b, n, e] * proj[e, d]
inline Tensor align(const Tensor& grid, const mvx::ModalityAlignment<Tensor>& w) {
  const std::size_t B = grid.dim(0), Nn = grid.dim(1), E = grid.dim(2);
  const std::size_t D = w.feature_proj.dim(1), Na = w.token_mix.dim(1);
  Tensor out({B, Na, D});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < Na; ++t)
      for (std::size_t d = 0; d < D; ++d) {
        double s = 0.0;
        for (std::size_t n = 0; n < Nn; ++n) {
          double f = 0.0;
          for (std::size_t e = 0; e < E; ++e) f += grid.at({b, n, e}) * w.feature_proj.at({e, d});
          s += w.token_mix.at({n, t}) * f;
        }
        out.at({b, t, d}) = s;
      }
  return out;
}

struct Dca {
  Tensor rgb, depth, event, k_multi, q_channel, k_channel, spatial, channel, fused;
};

// Grids of masked modalities are expected to be zero already.
inline Dca dca(const Tensor& rgb, const Tensor& depth, const Tensor& event,
               const mvx::DcaWeights<Tensor>& w, const mvx::DcaDims& dims,
               mvx::PathwayMask pathways = {}) {
  Dca r;
  r.rgb = align(rgb, w.rgb);
  r.depth = align(depth, w.depth);
  r.event = align(event, w.event);
  r.k_multi = concat_tokens(r.depth, r.event);
  const std::size_t B = rgb.dim(0), N = dims.n_aligned, D = dims.d_model;
  r.spatial = pathways.spatial ? attention(r.rgb, r.k_multi, r.k_multi, w.spatial, dims.heads_spatial).output
                               : Tensor({B, N, D});
  r.q_channel = transpose(r.rgb);
  r.k_channel = linear(transpose(r.k_multi), w.channel_align);
  r.channel = pathways.channel
                  ? attention(r.q_channel, r.k_channel, r.k_channel, w.channel, dims.heads_channel).output
                  : Tensor({B, D, N});
  r.fused = Tensor({B, N, D});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t d = 0; d < D; ++d)
        r.fused.at({b, n, d}) = 0.5 * (r.spatial.at({b, n, d}) + r.channel.at({b, d, n}));
  return r;
}

inline Tensor gap(const Tensor& f) {
  const std::size_t B = f.dim(0), N = f.dim(1), D = f.dim(2);
  Tensor y({B, D});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) s += f.at({b, n, d});
      y.at({b, d}) = s / static_cast<double>(N);
    }
  return y;
}

inline Tensor qattn(const Tensor& f, const mvx::AggregatorWeights<Tensor>& w, std::size_t heads) {
  const std::size_t B = f.dim(0), D = f.dim(2);
  Tensor q({B, 1, D});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d) q.at({b, 0, d}) = w.query.at({0, d});
  return attention(q, f, f, w.attn, heads).output.reshape({B, D});
}

// Same-padded depthwise convolution along the token axis.
inline Tensor dwconv(const Tensor& x, const Tensor& kernel) {
  const std::size_t B = x.dim(0), L = x.dim(1), D = x.dim(2), K = kernel.dim(0);
  const long half = static_cast<long>(K / 2);
  Tensor y({B, L, D});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t d = 0; d < D; ++d) {
        double s = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
          const long src = static_cast<long>(l) + static_cast<long>(j) - half;
          if (src >= 0 && src < static_cast<long>(L)) s += kernel.at({j, d}) * x.at({b, std::size_t(src), d});
        }
        y.at({b, l, d}) = s;
      }
  return y;
}

inline Tensor spectral(const Tensor& f, const mvx::AggregatorWeights<Tensor>& w, std::size_t heads) {
  const std::size_t B = f.dim(0), N = f.dim(1), D = f.dim(2);
  const Tensor conv = dwconv(f, w.spectral_kernel);
  Tensor wide({B, N, 2 * D});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t d = 0; d < D; ++d) {
        wide.at({b, n, d}) = f.at({b, n, d});
        wide.at({b, n, D + d}) = conv.at({b, n, d});
      }
  return qattn(linear(wide, w.spectral_proj), w, heads);
}

inline Tensor gates(const Tensor& depth, const mvx::AggregatorWeights<Tensor>& w) {
  const std::size_t B = depth.dim(0), N = depth.dim(1), D = depth.dim(2);
  Tensor g({B, N, 1});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < N; ++n) {
      double z = w.gate_b.data()[0];
      for (std::size_t d = 0; d < D; ++d) z += depth.at({b, n, d}) * w.gate_w.data()[d];
      g.at({b, n, 0}) = 1.0 / (1.0 + std::exp(-z));
    }
  return g;
}

inline Tensor depthgate(const Tensor& f, const Tensor& depth, const mvx::AggregatorWeights<Tensor>& w,
                        std::size_t heads) {
  const Tensor g = gates(depth, w);
  Tensor scaled(f.shape());
  for (std::size_t b = 0; b < f.dim(0); ++b)
    for (std::size_t n = 0; n < f.dim(1); ++n)
      for (std::size_t d = 0; d < f.dim(2); ++d) scaled.at({b, n, d}) = g.at({b, n, 0}) * f.at({b, n, d});
  return qattn(scaled, w, heads);
}

inline double sq_dist(const Tensor& p, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double d = p.at({i, c}) - p.at({j, c});
    s += d * d;
  }
  return s;
}

// Exhaustive greedy max-min: at each step the minimum distance of every
// candidate to the selected set is recomputed from scratch.
inline std::vector<std::size_t> fps(const Tensor& points, std::size_t m, std::size_t start) {
  const std::size_t n = points.dim(0);
  std::vector<std::size_t> sel{start};
  while (sel.size() < m) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (std::find(sel.begin(), sel.end(), c) != sel.end()) continue;
      double dmin = std::numeric_limits<double>::infinity();
      for (auto s : sel) dmin = std::min(dmin, sq_dist(points, c, s));
      if (dmin > best_d) {
        best_d = dmin;
        best = c;
      }
    }
    sel.push_back(best);
  }
  return sel;
}

inline std::vector<std::size_t> knn(const Tensor& points, std::size_t center, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < points.dim(0); ++i) all.emplace_back(sq_dist(points, center, i), i);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(all[i].second);
  return out;
}

// Returns [m, C_out] features.
inline Tensor set_abstraction(const Tensor& points, const Tensor& feats, const std::vector<std::size_t>& centroids,
                              std::size_t k, const mvx::PointMlp<Tensor>& mlp) {
  const std::size_t C = feats.empty() ? 0 : feats.dim(1);
  const std::size_t H = mlp.w1.dim(1), O = mlp.w2.dim(1);
  Tensor out({centroids.size(), O});
  for (std::size_t ci = 0; ci < centroids.size(); ++ci) {
    const std::size_t c = centroids[ci];
    std::vector<double> pooled(O, -std::numeric_limits<double>::infinity());
    for (std::size_t nb : oracle::knn(points, c, k)) {
      std::vector<double> in;
      for (std::size_t a = 0; a < 3; ++a) in.push_back(points.at({nb, a}) - points.at({c, a}));
      for (std::size_t a = 0; a < C; ++a) in.push_back(feats.at({nb, a}));
      std::vector<double> hidden(H);
      for (std::size_t h = 0; h < H; ++h) {
        double s = mlp.b1.data()[h];
        for (std::size_t i = 0; i < in.size(); ++i) s += in[i] * mlp.w1.at({i, h});
        hidden[h] = std::max(0.0, s);
      }
      for (std::size_t o = 0; o < O; ++o) {
        double s = mlp.b2.data()[o];
        for (std::size_t h = 0; h < H; ++h) s += hidden[h] * mlp.w2.at({h, o});
        pooled[o] = std::max(pooled[o], std::max(0.0, s));
      }
    }
    for (std::size_t o = 0; o < O; ++o) out.at({ci, o}) = pooled[o];
  }
  return out;
}

// Cell means [g*g, C] with cell r spanning rows floor(r H / g) .. floor((r+1) H / g).
inline Tensor patch_pool(const Tensor& image, std::size_t g) {
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  Tensor out({g * g, C});
  for (std::size_t r = 0; r < g; ++r)
    for (std::size_t q = 0; q < g; ++q) {
      const std::size_t y0 = r * H / g, y1 = (r + 1) * H / g, x0 = q * W / g, x1 = (q + 1) * W / g;
      for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x) s += image.at({y, x, c});
        out.at({r * g + q, c}) = s / static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
  return out;
}

// rank_i = 1 + #{x_j < x_i} + (#{x_j == x_i} - 1) / 2
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double y : x) {
      less += y < x[i];
      equal += y == x[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline mvx::AttentionWeights<Tensor> random_attention(std::size_t d, mvx::Rng& rng) {
  mvx::AttentionWeights<Tensor> w;
  mvx::AttentionWeights<Tensor>::visit(
      [&](const char* name, Tensor& t) {
        t = name[0] == 'b' ? random_tensor({d}, rng, 0.1)
                           : random_tensor({d, d}, rng, 1.0 / std::sqrt(static_cast<double>(d)));
      },
      w);
  return w;
}

// Full random weights including non-zero biases.
inline mvx::DcaWeights<Tensor> random_dca(const mvx::DcaDims& dims, mvx::Rng& rng) {
  mvx::DcaWeights<Tensor> w;
  for (auto* m : {&w.rgb, &w.depth, &w.event}) {
    m->feature_proj = random_tensor({dims.d_enc, dims.d_model}, rng, 1.0 / std::sqrt(double(dims.d_enc)));
    m->token_mix = random_tensor({dims.n_native, dims.n_aligned}, rng, 1.0 / std::sqrt(double(dims.n_native)));
  }
  w.spatial = random_attention(dims.d_model, rng);
  w.channel = random_attention(dims.n_aligned, rng);
  w.channel_align = random_tensor({2 * dims.n_aligned, dims.n_aligned}, rng, 1.0 / std::sqrt(2.0 * dims.n_aligned));
  return w;
}

inline mvx::AggregatorWeights<Tensor> random_aggregator(mvx::AggregatorKind kind, std::size_t d, std::size_t kernel,
                                                        mvx::Rng& rng) {
  mvx::AggregatorWeights<Tensor> w;
  if (kind == mvx::AggregatorKind::Gap) return w;
  w.query = random_tensor({1, d}, rng, 0.5);
  w.attn = random_attention(d, rng);
  if (kind == mvx::AggregatorKind::SpectralQAttn) {
    w.spectral_kernel = random_tensor({kernel, d}, rng, 0.5);
    w.spectral_proj = random_tensor({2 * d, d}, rng, 1.0 / std::sqrt(2.0 * d));
  }
  if (kind == mvx::AggregatorKind::DepthGateQAttn) {
    w.gate_w = random_tensor({d}, rng, 0.5);
    w.gate_b = random_tensor({1}, rng, 0.5);
  }
  return w;
}

}  // namespace oracle
