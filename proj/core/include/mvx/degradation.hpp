#pragma once

#include <cstdint>
#include <string_view>

#include "mvx/encoders.hpp"

namespace mvx {

// Sensor failure types: motion blur, over/under-exposure, LiDAR jitter,
// event low-resolution.
enum class DegradationKind { MotionBlur, Overexposure, Underexposure, LidarJitter, EventLowRes };

std::string_view to_string(DegradationKind kind);   // mb | oe | ue | lj | el
DegradationKind parse_degradation(std::string_view name);

struct DegradationSpec {
  DegradationKind kind = DegradationKind::MotionBlur;
  std::size_t kernel = 9;   // MB box length, odd
  double gain = 3.0;        // OE (> 1) or UE (in (0, 1))
  double sigma = 0.05;      // LJ noise std in meters
  std::size_t factor = 4;   // EL block size
  std::uint64_t seed = 0;

  // Default severities: k = 9, g = 3.0 / 0.3, sigma = 0.05 m, f = 4.
  static DegradationSpec defaults(DegradationKind kind, std::uint64_t seed = 0);
  // Single "severity" knob as exposed on the CLI: kernel, gain, sigma or factor.
  static DegradationSpec with_severity(DegradationKind kind, double severity, std::uint64_t seed);
  // Throws ConfigError when the severity is out of range for the kind.
  void validate() const;
  bool targets_lidar() const { return kind == DegradationKind::LidarJitter; }
};

// Horizontal box filter of odd length k with edge-clamped borders.
Image motion_blur(const Image& image, std::size_t k);
// clamp(g * pixel, 0, 1)
Image exposure(const Image& image, double gain);
// Adds N(0, sigma^2) per coordinate from Rng(seed) in x, y, z point order.
PointCloud lidar_jitter(const PointCloud& cloud, double sigma, std::uint64_t seed);
// f x f block average, then nearest-neighbour upsample back to full size.
Image event_lowres(const Image& image, std::size_t f);

Image apply(const Image& image, const DegradationSpec& spec);
PointCloud apply(const PointCloud& cloud, const DegradationSpec& spec);

}  // namespace mvx
