#include "mvx/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvx/error.hpp"
#include "mvx/rng.hpp"

namespace mvx {

std::string_view to_string(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::MotionBlur: return "mb";
    case DegradationKind::Overexposure: return "oe";
    case DegradationKind::Underexposure: return "ue";
    case DegradationKind::LidarJitter: return "lj";
    case DegradationKind::EventLowRes: return "el";
  }
  return "?";
}

DegradationKind parse_degradation(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "mb") return DegradationKind::MotionBlur;
  if (lower == "oe") return DegradationKind::Overexposure;
  if (lower == "ue") return DegradationKind::Underexposure;
  if (lower == "lj") return DegradationKind::LidarJitter;
  if (lower == "el") return DegradationKind::EventLowRes;
  throw ConfigError("unknown degradation '" + std::string(name) + "' (expected mb|oe|ue|lj|el)");
}

DegradationSpec DegradationSpec::defaults(DegradationKind kind, std::uint64_t seed) {
  DegradationSpec s;
  s.kind = kind;
  s.seed = seed;
  s.gain = kind == DegradationKind::Underexposure ? 0.3 : 3.0;
  return s;
}

DegradationSpec DegradationSpec::with_severity(DegradationKind kind, double severity,
                                               std::uint64_t seed) {
  DegradationSpec s = defaults(kind, seed);
  auto as_count = [](double v) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("severity must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  switch (kind) {
    case DegradationKind::MotionBlur: s.kernel = as_count(severity); break;
    case DegradationKind::Overexposure:
    case DegradationKind::Underexposure: s.gain = severity; break;
    case DegradationKind::LidarJitter: s.sigma = severity; break;
    case DegradationKind::EventLowRes: s.factor = as_count(severity); break;
  }
  s.validate();
  return s;
}

void DegradationSpec::validate() const {
  switch (kind) {
    case DegradationKind::MotionBlur:
      if (kernel == 0 || kernel % 2 == 0) throw ConfigError("motion blur kernel must be odd and >= 1");
      break;
    case DegradationKind::Overexposure:
      if (!(gain > 1.0)) throw ConfigError("overexposure gain must exceed 1");
      break;
    case DegradationKind::Underexposure:
      if (!(gain > 0.0 && gain < 1.0)) throw ConfigError("underexposure gain must lie in (0, 1)");
      break;
    case DegradationKind::LidarJitter:
      if (!(sigma >= 0.0)) throw ConfigError("jitter sigma must be >= 0");
      break;
    case DegradationKind::EventLowRes:
      if (factor == 0) throw ConfigError("low-resolution factor must be >= 1");
      break;
  }
}

Image motion_blur(const Image& image, std::size_t k) {
  if (k == 0 || k % 2 == 0) throw ConfigError("motion blur kernel must be odd, got " + std::to_string(k));
  const std::size_t H = image.height(), W = image.width(), C = image.channels();
  if (k > W) throw InputError("motion blur kernel longer than image width");
  if (k == 1) return image;
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  Tensor out({H, W, C});
  auto o = out.mutable_data();
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < C; ++c) {
        double total = 0.0;
        for (std::ptrdiff_t j = -half; j <= half; ++j) {
          const auto xs = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) + j, 0,
                                                     static_cast<std::ptrdiff_t>(W) - 1);
          total += image.at(y, static_cast<std::size_t>(xs), c);
        }
        o[(y * W + x) * C + c] = std::clamp(total / static_cast<double>(k), 0.0, 1.0);
      }
  return Image(std::move(out));
}

Image exposure(const Image& image, double gain) {
  if (!(gain > 0.0)) throw ConfigError("exposure gain must be positive");
  Tensor out = image.pixels().clone();
  for (auto& v : out.mutable_data()) v = std::clamp(gain * v, 0.0, 1.0);
  return Image(std::move(out));
}

PointCloud lidar_jitter(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("jitter sigma must be >= 0");
  if (sigma == 0.0) return cloud;
  Rng rng(seed);
  Tensor pts = cloud.points().clone();
  for (auto& v : pts.mutable_data()) v += sigma * rng.normal();
  return PointCloud(std::move(pts), cloud.intensity());
}

Image event_lowres(const Image& image, std::size_t f) {
  const std::size_t H = image.height(), W = image.width(), C = image.channels();
  if (f == 0 || H % f != 0 || W % f != 0) {
    throw InputError("low-resolution factor " + std::to_string(f) + " does not divide " +
                     std::to_string(H) + "x" + std::to_string(W));
  }
  if (f == 1) return image;
  Tensor out({H, W, C});
  auto o = out.mutable_data();
  const double area = static_cast<double>(f * f);
  for (std::size_t by = 0; by < H / f; ++by)
    for (std::size_t bx = 0; bx < W / f; ++bx)
      for (std::size_t c = 0; c < C; ++c) {
        double total = 0.0;
        for (std::size_t y = by * f; y < (by + 1) * f; ++y)
          for (std::size_t x = bx * f; x < (bx + 1) * f; ++x) total += image.at(y, x, c);
        const double avg = std::clamp(total / area, 0.0, 1.0);
        for (std::size_t y = by * f; y < (by + 1) * f; ++y)
          for (std::size_t x = bx * f; x < (bx + 1) * f; ++x) o[(y * W + x) * C + c] = avg;
      }
  return Image(std::move(out));
}

Image apply(const Image& image, const DegradationSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case DegradationKind::MotionBlur: return motion_blur(image, spec.kernel);
    case DegradationKind::Overexposure:
    case DegradationKind::Underexposure: return exposure(image, spec.gain);
    case DegradationKind::EventLowRes: return event_lowres(image, spec.factor);
    case DegradationKind::LidarJitter: break;
  }
  throw ConfigError("LiDAR jitter cannot be applied to an image");
}

PointCloud apply(const PointCloud& cloud, const DegradationSpec& spec) {
  spec.validate();
  if (spec.kind != DegradationKind::LidarJitter) {
    throw ConfigError(std::string("degradation ") + std::string(to_string(spec.kind)) +
                      " cannot be applied to a point cloud");
  }
  return lidar_jitter(cloud, spec.sigma, spec.seed);
}

}  // namespace mvx
