#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvx/encoders.hpp"
#include "mvx/eval.hpp"

namespace mvx {

inline constexpr std::size_t kQaPerScene = 13;

struct ViewFiles {
  std::string rgb, depth, event;  // relative to the manifest directory
};

struct QAItem {
  std::string id;
  QuestionLevel level = QuestionLevel::Global;
  std::string question;
  std::string reference;
};

struct SceneRecord {
  std::string scene_id;
  std::string split = "train";           // train | val | test
  Condition weather = Condition::CL;     // one of the five weather tags
  std::optional<Condition> failure;      // a sensor-failure tag, if injected
  std::array<ViewFiles, 4> views;        // front, back, left, right
  std::string lidar;
  std::vector<QAItem> qa;

  // The Table-2 column a scene's questions are reported under: the failure
  // tag when present, otherwise the weather tag.
  Condition condition() const { return failure.value_or(weather); }
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<SceneRecord> scenes;

  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
  std::size_t qa_count() const;
};

// Structural checks: unique scene and QA ids, valid tags, non-empty paths and
// QA text, weather tag in the weather set, failure tag in the failure set.
// Throws InputError.
void validate(const Manifest& manifest);
// Returns one message per referenced file that is missing or fails to parse.
std::vector<std::string> check_files(const Manifest& manifest);

// One JSON object per line; see README for the schema.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
std::string scene_to_json(const SceneRecord& scene);
SceneRecord scene_from_json(const std::string& line);

}  // namespace mvx
