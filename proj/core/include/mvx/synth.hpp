#pragma once

#include <cstdint>
#include <filesystem>

#include "mvx/manifest.hpp"

namespace mvx {

struct SynthOptions {
  std::size_t image_size = 28;
  std::size_t lidar_points = 512;
};

// Writes seeded images (RGB, depth, event for four views), point clouds and
// 13 templated QA records per scene, plus manifest.jsonl, into out_dir.
// Weather tags are stratified to equal shares and about 35.5% of scenes carry
// a sensor-failure tag split MB 42.7 / UE 14.2 / OE 14.3 / LJ 14.2 / EL 14.6.
// Scenes are split 80/10/10 into train/val/test.
Manifest make_synthetic_manifest(std::size_t n_scenes, std::uint64_t seed,
                                 const std::filesystem::path& out_dir,
                                 const SynthOptions& options = {});

}  // namespace mvx
