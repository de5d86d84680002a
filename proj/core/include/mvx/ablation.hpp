#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvx/pipeline.hpp"

namespace mvx {

struct AblationPlan {
  std::vector<RunSpec> runs;
  void validate() const;  // every run valid, names unique
};

// Modality combinations RD, RE, DE, RDE, then the same with LiDAR.
AblationPlan table4_plan(AggregatorKind aggregator = AggregatorKind::QAttn);
// Attention components s, s+Q, c, c+Q, s+c, s+c+Q with all modalities.
AblationPlan table3_plan(AggregatorKind aggregator = AggregatorKind::QAttn);

struct RunStats {
  std::string name;
  std::string modalities;
  std::string components;   // e.g. "sAttn+cAttn+QAttn"
  std::string aggregator;
  std::size_t scenes_ok = 0;
  std::size_t scenes_failed = 0;
  double mean_view_norm = 0.0;   // mean L2 norm of the four view tokens
  double mean_lidar_norm = 0.0;
  double seconds = 0.0;
};

struct AblationResult {
  std::vector<RunStats> runs;
  // Mean cosine distance between corresponding tokens of runs i and j over
  // scenes that succeeded in every run.
  std::vector<std::vector<double>> cosine_distance;
  std::vector<std::string> errors;  // "scene: message"
  std::size_t failures = 0;         // scenes that failed
  double seconds = 0.0;
};

// Each scene is encoded once and then fused under every run. When out_dir is
// set, tokens go to out_dir/<run>/<scene_id>.mvxt.
AblationResult run_ablation(const Manifest& manifest, const ModelParams<float>& params,
                            const AblationPlan& plan, const PipelineOptions& options,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string ablation_to_json(const AblationResult& result);
std::string ablation_to_table(const AblationResult& result);

}  // namespace mvx
