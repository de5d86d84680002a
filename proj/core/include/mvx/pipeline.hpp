#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvx/aggregation.hpp"
#include "mvx/degradation.hpp"
#include "mvx/manifest.hpp"
#include "mvx/model.hpp"

namespace mvx {

// Encoder outputs for one scene; the four views form the batch axis.
struct EncodedScene {
  TensorF rgb, depth, event;  // [4, n_native, d_enc]
  TensorF lidar;              // [d_model]
};

struct RunSpec {
  std::string name = "full";
  ModalityMask modalities;
  PathwayMask pathways;
  bool query_attention = true;  // off falls back to GAP
  AggregatorKind aggregator = AggregatorKind::QAttn;

  AggregatorKind effective_aggregator() const {
    return query_attention ? aggregator : AggregatorKind::Gap;
  }
  // Throws ConfigError when no camera is active or both pathways are off.
  void validate() const;
};

struct PipelineOptions {
  bool apply_failures = true;  // degrade inputs according to the scene's failure tag
  std::size_t workers = 1;
  std::uint64_t seed = 0;      // seeds the degradation noise
};

// The degradation the pipeline applies for a failure tag at default severity.
std::optional<DegradationSpec> failure_degradation(const SceneRecord& scene, std::uint64_t seed);

// Reads, degrades and encodes one scene. Masked modalities are still encoded.
EncodedScene encode_scene(const Manifest& manifest, const SceneRecord& scene,
                          const ModelParams<float>& params, const PipelineOptions& options);

// DCA per view, aggregation, LiDAR token: [5, d_model] ordered front, back,
// left, right, LiDAR. A masked LiDAR contributes a zero token.
TensorF fuse_scene(const EncodedScene& scene, const ModelParams<float>& params, const RunSpec& run);

// Replaces the grids of masked modalities with zeros.
EncodedScene zero_masked(const EncodedScene& scene, const ModalityMask& mask);

struct SceneResult {
  std::string scene_id;
  TensorF tokens;       // [5, d_model], empty on failure
  std::string error;    // non-empty when the scene failed
  double seconds = 0.0;
  bool ok() const { return error.empty(); }
};

struct PipelineResult {
  std::vector<SceneResult> scenes;  // manifest order
  std::size_t failures = 0;
  double seconds = 0.0;
};

// Runs one plan entry over every scene. Config violations throw before the
// first scene; per-scene errors are recorded and the run continues. When
// out_dir is set each scene's tokens are written to out_dir/<scene_id>.mvxt.
PipelineResult run_pipeline(const Manifest& manifest, const ModelParams<float>& params,
                            const RunSpec& run, const PipelineOptions& options,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace mvx
