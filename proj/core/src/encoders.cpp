#include "mvx/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mvx/error.hpp"
#include "mvx/ops.hpp"
#include "mvx/rng.hpp"

namespace mvx {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Rgb: return "rgb";
    case Modality::Depth: return "depth";
    case Modality::Event: return "event";
    case Modality::Lidar: return "lidar";
  }
  return "?";
}

std::string_view to_string(View v) {
  switch (v) {
    case View::Front: return "front";
    case View::Back: return "back";
    case View::Left: return "left";
    case View::Right: return "right";
  }
  return "?";
}

Image::Image(Tensor pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rank() != 3 || (pixels_.dim(2) != 1 && pixels_.dim(2) != 3) || pixels_.dim(0) == 0 ||
      pixels_.dim(1) == 0) {
    throw InputError("image must be [H, W, 1|3], got " + shape_str(pixels_.shape()));
  }
  for (double v : pixels_.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("image values must lie in [0, 1]");
  }
}

Image Image::filled(std::size_t height, std::size_t width, std::size_t channels, double value) {
  return Image(Tensor::full({height, width, channels}, value));
}

PointCloud::PointCloud(Tensor points, Tensor intensity)
    : points_(std::move(points)), intensity_(std::move(intensity)) {
  if (points_.rank() != 2 || points_.dim(1) != 3 || points_.dim(0) == 0) {
    throw InputError("point cloud must be [n >= 1, 3], got " + shape_str(points_.shape()));
  }
  for (double v : points_.data()) {
    if (!std::isfinite(v)) throw InputError("point coordinates must be finite");
  }
  if (!intensity_.empty() && intensity_.size() != points_.dim(0)) {
    throw InputError("intensity length does not match point count");
  }
}

template <typename T>
FeatureGrid<T> patch_encode(const Image& image, std::size_t grid, const BasicTensor<T>& proj) {
  const std::size_t H = image.height(), W = image.width(), C = image.channels();
  if (grid == 0 || H < grid || W < grid) {
    throw InputError("image " + std::to_string(H) + "x" + std::to_string(W) +
                     " is smaller than the " + std::to_string(grid) + "x" + std::to_string(grid) +
                     " grid");
  }
  if (proj.rank() != 2 || proj.dim(0) != C) {
    throw DimensionError("patch projection " + shape_str(proj.shape()) + " does not accept " +
                         std::to_string(C) + " channels");
  }
  BasicTensor<T> pooled({grid * grid, C});
  auto out = pooled.mutable_data();
  for (std::size_t r = 0; r < grid; ++r) {
    const std::size_t y0 = r * H / grid, y1 = (r + 1) * H / grid;
    for (std::size_t c = 0; c < grid; ++c) {
      const std::size_t x0 = c * W / grid, x1 = (c + 1) * W / grid;
      const double count = static_cast<double>((y1 - y0) * (x1 - x0));
      for (std::size_t ch = 0; ch < C; ++ch) {
        double total = 0.0;
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x) total += image.at(y, x, ch);
        out[(r * grid + c) * C + ch] = static_cast<T>(total / count);
      }
    }
  }
  FeatureGrid<T> fg;
  fg.values = ops::unsqueeze(ops::linear(pooled, proj), 0);
  return fg;
}

namespace {

double sq_dist(const double* a, const double* b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::vector<std::size_t> farthest_point_sample(const Tensor& points, std::size_t m,
                                               std::size_t start) {
  if (points.rank() != 2 || points.dim(1) != 3) {
    throw DimensionError("farthest_point_sample expects [n, 3], got " + shape_str(points.shape()));
  }
  const std::size_t n = points.dim(0);
  if (m == 0 || m > n) {
    throw InputError("cannot sample " + std::to_string(m) + " of " + std::to_string(n) + " points");
  }
  if (start >= n) throw InputError("FPS start index out of range");
  const double* p = points.data().data();
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> picked{start};
  picked.reserve(m);
  std::size_t last = start;
  // Selected points carry a negative distance so duplicates are never re-picked.
  min_d[start] = -1.0;
  while (picked.size() < m) {
    std::size_t best = n;
    double best_d = -2.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], sq_dist(p + 3 * i, p + 3 * last));
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    picked.push_back(best);
    min_d[best] = -1.0;
    last = best;
  }
  return picked;
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m,
                                               std::size_t start) {
  return farthest_point_sample(cloud.points(), m, start);
}

std::vector<std::size_t> knn(const Tensor& points, std::size_t center, std::size_t k) {
  const std::size_t n = points.dim(0);
  if (k == 0 || k > n) {
    throw InputError("k_neighbors " + std::to_string(k) + " invalid for " + std::to_string(n) +
                     " points");
  }
  const double* p = points.data().data();
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = {sq_dist(p + 3 * i, p + 3 * center), i};
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

template <typename T>
SetAbstractionResult<T> set_abstraction(const Tensor& points, const BasicTensor<T>& feats,
                                        const std::vector<std::size_t>& centroids,
                                        std::size_t k_neighbors,
                                        const PointMlp<BasicTensor<T>>& mlp) {
  if (points.rank() != 2 || points.dim(1) != 3 || points.dim(0) == 0) {
    throw InputError("set_abstraction needs a non-empty [n, 3] cloud");
  }
  const std::size_t n = points.dim(0);
  const std::size_t c = feats.empty() ? 0 : feats.dim(1);
  if (!feats.empty() && feats.dim(0) != n) {
    throw DimensionError("features " + shape_str(feats.shape()) + " do not match " +
                         std::to_string(n) + " points");
  }
  if (centroids.empty()) throw InputError("set_abstraction needs at least one centroid");
  for (auto ci : centroids)
    if (ci >= n) throw InputError("centroid index out of range");
  const std::size_t m = centroids.size(), k = k_neighbors, in_dim = 3 + c;
  if (mlp.w1.dim(0) != in_dim) {
    throw DimensionError("MLP input width " + std::to_string(mlp.w1.dim(0)) + " but grouped rows have " +
                         std::to_string(in_dim));
  }
  const double* p = points.data().data();
  BasicTensor<T> grouped({m * k, in_dim});
  auto g = grouped.mutable_data();
  Tensor sub_points({m, 3});
  for (std::size_t ci = 0; ci < m; ++ci) {
    const std::size_t center = centroids[ci];
    for (std::size_t a = 0; a < 3; ++a) sub_points.mutable_data()[ci * 3 + a] = p[center * 3 + a];
    const auto nb = knn(points, center, k);
    for (std::size_t j = 0; j < k; ++j) {
      T* row = g.data() + (ci * k + j) * in_dim;
      for (std::size_t a = 0; a < 3; ++a) row[a] = static_cast<T>(p[nb[j] * 3 + a] - p[center * 3 + a]);
      for (std::size_t f = 0; f < c; ++f) row[3 + f] = feats.data()[nb[j] * c + f];
    }
  }
  auto h = ops::relu(ops::linear(grouped, mlp.w1, mlp.b1));
  h = ops::relu(ops::linear(h, mlp.w2, mlp.b2));
  const std::size_t out_dim = h.dim(1);
  SetAbstractionResult<T> result;
  result.points = std::move(sub_points);
  result.feats = ops::max(h.reshape({m, k, out_dim}), 1);
  return result;
}

namespace {

template <typename T>
BasicTensor<T> random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  BasicTensor<T> w({rows, cols});
  const double sd = std::sqrt(2.0 / static_cast<double>(rows));
  for (auto& x : w.mutable_data()) x = static_cast<T>(rng.normal() * sd);
  return w;
}

std::size_t lexicographic_min(const Tensor& points) {
  const double* p = points.data().data();
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.dim(0); ++i) {
    if (std::lexicographical_compare(p + 3 * i, p + 3 * i + 3, p + 3 * best, p + 3 * best + 3)) {
      best = i;
    }
  }
  return best;
}

}  // namespace

template <typename T>
LidarWeights<BasicTensor<T>> init_lidar_weights(const LidarConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  LidarWeights<BasicTensor<T>> w;
  w.level1.w1 = random_matrix<T>(rng, 4, config.hidden_l1);
  w.level1.b1 = BasicTensor<T>({config.hidden_l1});
  w.level1.w2 = random_matrix<T>(rng, config.hidden_l1, config.hidden_l1);
  w.level1.b2 = BasicTensor<T>({config.hidden_l1});
  w.level2.w1 = random_matrix<T>(rng, 3 + config.hidden_l1, config.hidden_l2);
  w.level2.b1 = BasicTensor<T>({config.hidden_l2});
  w.level2.w2 = random_matrix<T>(rng, config.hidden_l2, config.hidden_l2);
  w.level2.b2 = BasicTensor<T>({config.hidden_l2});
  w.proj_w = random_matrix<T>(rng, config.hidden_l2, config.out_dim);
  w.proj_b = BasicTensor<T>({config.out_dim});
  return w;
}

template <typename T>
BasicTensor<T> encode_lidar(const PointCloud& cloud, const LidarWeights<BasicTensor<T>>& weights,
                            const LidarConfig& config) {
  const std::size_t n = cloud.size();
  BasicTensor<T> feats({n, 1});
  if (cloud.has_intensity()) {
    for (std::size_t i = 0; i < n; ++i) feats.mutable_data()[i] = static_cast<T>(cloud.intensity().data()[i]);
  }
  const std::size_t m1 = std::min(config.centroids_l1, n);
  const auto c1 = farthest_point_sample(cloud.points(), m1, lexicographic_min(cloud.points()));
  const auto l1 = set_abstraction(cloud.points(), feats, c1, std::min(config.k_neighbors, n),
                                  weights.level1);

  const std::size_t m2 = std::min(config.centroids_l2, m1);
  const auto c2 = farthest_point_sample(l1.points, m2, lexicographic_min(l1.points));
  const auto l2 = set_abstraction(l1.points, l1.feats, c2, std::min(config.k_neighbors, m1),
                                  weights.level2);

  const auto global = ops::max(l2.feats, 0);
  return ops::linear(global, weights.proj_w, weights.proj_b);
}

template <typename T>
FeatureGrid<T> encode_image(const Image& image, Modality modality, View view, std::size_t grid,
                            const BasicTensor<T>& patch_proj) {
  FeatureGrid<T> fg;
  if (image.channels() == 1 && patch_proj.dim(0) == 3) {
    Tensor rgb({image.height(), image.width(), 3});
    auto dst = rgb.mutable_data();
    auto src = image.pixels().data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
    fg = patch_encode(Image(rgb), grid, patch_proj);
  } else {
    fg = patch_encode(image, grid, patch_proj);
  }
  fg.modality = modality;
  fg.view = view;
  return fg;
}

template <typename T>
BasicTensor<T> init_patch_projection(std::size_t out_dim, std::uint64_t seed) {
  Rng rng(seed);
  return random_matrix<T>(rng, 3, out_dim);
}

#define MVX_INSTANTIATE_ENC(T)                                                                   \
  template FeatureGrid<T> patch_encode(const Image&, std::size_t, const BasicTensor<T>&);       \
  template SetAbstractionResult<T> set_abstraction(const Tensor&, const BasicTensor<T>&,        \
                                                   const std::vector<std::size_t>&, std::size_t, \
                                                   const PointMlp<BasicTensor<T>>&);            \
  template LidarWeights<BasicTensor<T>> init_lidar_weights(const LidarConfig&, std::uint64_t);  \
  template BasicTensor<T> encode_lidar(const PointCloud&, const LidarWeights<BasicTensor<T>>&,  \
                                       const LidarConfig&);                                     \
  template FeatureGrid<T> encode_image(const Image&, Modality, View, std::size_t,               \
                                       const BasicTensor<T>&);                                  \
  template BasicTensor<T> init_patch_projection(std::size_t, std::uint64_t);

MVX_INSTANTIATE_ENC(float)
MVX_INSTANTIATE_ENC(double)

}  // namespace mvx
