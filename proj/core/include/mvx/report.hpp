#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvx/eval.hpp"
#include "mvx/judge.hpp"
#include "mvx/manifest.hpp"

namespace mvx {

struct PredictionLine {
  std::string id;
  std::string prediction;
};

// JSON Lines with at least "id" and "prediction"; other fields are ignored.
std::vector<PredictionLine> load_predictions(const std::filesystem::path& path);

// Joins predictions with the manifest's QA records (which supply level,
// condition, question and reference). Unresolved ids are listed in
// unresolved and skipped.
std::vector<QARecord> resolve_predictions(const Manifest& manifest,
                                          const std::vector<PredictionLine>& predictions,
                                          std::vector<std::string>& unresolved);

MetricReport evaluate(const Manifest& manifest, const std::vector<PredictionLine>& predictions,
                      const std::optional<JudgeEndpoint>& judge = std::nullopt);

std::string report_to_json(const MetricReport& report);
// Metrics as rows, conditions (then overall) as columns, followed by a
// per-level table.
std::string report_to_table(const MetricReport& report);

}  // namespace mvx
