#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mvx/tensor.hpp"

namespace mvx {

enum class Modality { Rgb, Depth, Event, Lidar };
enum class View { Front, Back, Left, Right };

inline constexpr View kViews[] = {View::Front, View::Back, View::Left, View::Right};

std::string_view to_string(Modality m);
std::string_view to_string(View v);

// Camera frame as [H, W, C] with C = 3 (RGB) or 1 (depth, event), values in [0, 1].
class Image {
 public:
  Image() = default;
  explicit Image(Tensor pixels);
  static Image filled(std::size_t height, std::size_t width, std::size_t channels, double value);

  std::size_t height() const { return pixels_.dim(0); }
  std::size_t width() const { return pixels_.dim(1); }
  std::size_t channels() const { return pixels_.dim(2); }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels_.data()[(y * width() + x) * channels() + c];
  }
  const Tensor& pixels() const { return pixels_; }

 private:
  Tensor pixels_;
};

// Ego-frame LiDAR sweep: points [n, 3] in meters, optional intensity [n].
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(Tensor points, Tensor intensity = {});

  std::size_t size() const { return points_.dim(0); }
  const Tensor& points() const { return points_; }
  const Tensor& intensity() const { return intensity_; }
  bool has_intensity() const { return !intensity_.empty(); }

 private:
  Tensor points_;
  Tensor intensity_;
};

template <typename T>
struct FeatureGrid {
  BasicTensor<T> values;  // [B, N, D]
  Modality modality = Modality::Rgb;
  View view = View::Front;
  bool aligned = false;

  std::size_t batch() const { return values.dim(0); }
  std::size_t tokens() const { return values.dim(1); }
  std::size_t channels() const { return values.dim(2); }
};

// Partitions the image into grid x grid near-equal cells (cell r spans rows
// [floor(r*H/g), floor((r+1)*H/g))), mean-pools each cell per channel and
// projects the pooled vector with proj [C, D]. Tokens are row-major.
// Result: [1, grid*grid, D]. Throws InputError when the image is smaller
// than the grid.
template <typename T>
FeatureGrid<T> patch_encode(const Image& image, std::size_t grid, const BasicTensor<T>& proj);

// Greedy max-min selection starting at `start`; ties go to the lowest index.
std::vector<std::size_t> farthest_point_sample(const Tensor& points, std::size_t m,
                                               std::size_t start = 0);
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m,
                                               std::size_t start = 0);

// k nearest points to `center` by Euclidean distance, ties to the lowest index.
std::vector<std::size_t> knn(const Tensor& points, std::size_t center, std::size_t k);

// Shared per-point network: two linear + ReLU layers.
template <class H>
struct PointMlp {
  H w1, b1, w2, b2;

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    f("w1", s.w1...);
    f("b1", s.b1...);
    f("w2", s.w2...);
    f("b2", s.b2...);
  }
};

template <typename T>
struct SetAbstractionResult {
  Tensor points;          // [m, 3]
  BasicTensor<T> feats;   // [m, C_out]
};

// For each centroid: gather k nearest neighbours, re-centre their coordinates
// on the centroid, run the MLP on [offset | feature], max-pool over the k rows.
// feats may be empty (no per-point features).
template <typename T>
SetAbstractionResult<T> set_abstraction(const Tensor& points, const BasicTensor<T>& feats,
                                        const std::vector<std::size_t>& centroids,
                                        std::size_t k_neighbors,
                                        const PointMlp<BasicTensor<T>>& mlp);

struct LidarConfig {
  std::size_t centroids_l1 = 64;
  std::size_t centroids_l2 = 16;
  std::size_t k_neighbors = 8;
  std::size_t hidden_l1 = 64;
  std::size_t hidden_l2 = 128;
  std::size_t out_dim = 512;
};

template <class H>
struct LidarWeights {
  PointMlp<H> level1;  // [4 -> h1 -> h1]  (offset xyz + intensity)
  PointMlp<H> level2;  // [3 + h1 -> h2 -> h2]
  H proj_w, proj_b;    // [h2, out_dim], [out_dim]

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    auto prefixed = [&f](const char* prefix) {
      return [&f, prefix](const char* name, auto&... t) {
        f((std::string(prefix) + name).c_str(), t...);
      };
    };
    PointMlp<H>::visit(prefixed("level1."), s.level1...);
    PointMlp<H>::visit(prefixed("level2."), s.level2...);
    f("proj_w", s.proj_w...);
    f("proj_b", s.proj_b...);
  }
};

template <typename T>
LidarWeights<BasicTensor<T>> init_lidar_weights(const LidarConfig& config, std::uint64_t seed);

// Two set-abstraction levels, global max-pool, linear projection to out_dim.
// FPS starts at the lexicographically smallest point so the result does not
// depend on input order; centroid and neighbour counts are clamped to n.
template <typename T>
BasicTensor<T> encode_lidar(const PointCloud& cloud, const LidarWeights<BasicTensor<T>>& weights,
                            const LidarConfig& config = {});

// Shared vision encoder: single-channel frames are replicated to three
// channels, then patch-encoded with one [3, D] projection.
template <typename T>
FeatureGrid<T> encode_image(const Image& image, Modality modality, View view, std::size_t grid,
                            const BasicTensor<T>& patch_proj);

template <typename T>
BasicTensor<T> init_patch_projection(std::size_t out_dim, std::uint64_t seed);

}  // namespace mvx
