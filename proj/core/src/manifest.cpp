#include "mvx/manifest.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "mvx/error.hpp"
#include "mvx/mvxt.hpp"

namespace mvx {

using nlohmann::json;

std::size_t Manifest::qa_count() const {
  std::size_t n = 0;
  for (const auto& s : scenes) n += s.qa.size();
  return n;
}

void validate(const Manifest& manifest) {
  std::set<std::string> scene_ids, qa_ids;
  for (const auto& s : manifest.scenes) {
    const std::string where = "scene '" + s.scene_id + "'";
    if (s.scene_id.empty()) throw InputError("scene with an empty id");
    if (!scene_ids.insert(s.scene_id).second) throw InputError("duplicate " + where);
    if (s.split != "train" && s.split != "val" && s.split != "test") {
      throw InputError(where + " has unknown split '" + s.split + "'");
    }
    if (!is_weather(s.weather)) throw InputError(where + " has a non-weather weather tag");
    if (s.failure && is_weather(*s.failure)) throw InputError(where + " has a weather tag as failure");
    for (const auto& v : s.views) {
      if (v.rgb.empty() || v.depth.empty() || v.event.empty()) {
        throw InputError(where + " is missing a camera file path");
      }
    }
    if (s.lidar.empty()) throw InputError(where + " is missing its lidar path");
    for (const auto& q : s.qa) {
      if (q.id.empty()) throw InputError(where + " has a QA record without id");
      if (!qa_ids.insert(q.id).second) throw InputError("duplicate QA id '" + q.id + "'");
      if (q.question.empty() || q.reference.empty()) {
        throw InputError("QA record '" + q.id + "' has empty text");
      }
    }
  }
}

std::vector<std::string> check_files(const Manifest& manifest) {
  std::vector<std::string> problems;
  auto check = [&](const SceneRecord& s, const std::string& rel) {
    try {
      mvxt::decode_header(mvxt::read_bytes(manifest.resolve(rel)));
    } catch (const std::exception& e) {
      problems.push_back(s.scene_id + ": " + rel + ": " + e.what());
    }
  };
  for (const auto& s : manifest.scenes) {
    for (const auto& v : s.views) {
      check(s, v.rgb);
      check(s, v.depth);
      check(s, v.event);
    }
    check(s, s.lidar);
  }
  return problems;
}

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string scene_to_json(const SceneRecord& s) {
  json views = json::object();
  for (std::size_t i = 0; i < 4; ++i) {
    views[std::string(to_string(kViews[i]))] = {
        {"rgb", s.views[i].rgb}, {"depth", s.views[i].depth}, {"event", s.views[i].event}};
  }
  json qa = json::array();
  for (const auto& q : s.qa) {
    qa.push_back({{"id", q.id},
                  {"level", std::string(to_string(q.level))},
                  {"question", q.question},
                  {"reference", q.reference}});
  }
  json j = {{"scene_id", s.scene_id},
            {"split", s.split},
            {"weather", std::string(to_string(s.weather))},
            {"failure", s.failure ? json(std::string(to_string(*s.failure))) : json(nullptr)},
            {"condition", std::string(to_string(s.condition()))},
            {"views", views},
            {"lidar", s.lidar},
            {"qa", qa}};
  return j.dump();
}

SceneRecord scene_from_json(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InputError("manifest line is not a JSON object");
  SceneRecord s;
  s.scene_id = field<std::string>(j, "scene_id", "manifest");
  const std::string where = "scene '" + s.scene_id + "'";
  if (j.contains("split")) s.split = field<std::string>(j, "split", where);
  s.weather = parse_condition(field<std::string>(j, "weather", where));
  if (j.contains("failure") && !j["failure"].is_null()) {
    s.failure = parse_condition(field<std::string>(j, "failure", where));
  }
  if (j.contains("condition") && parse_condition(field<std::string>(j, "condition", where)) != s.condition()) {
    throw InputError(where + ": condition tag disagrees with weather/failure");
  }
  const json& views = j.contains("views") ? j["views"] : json();
  if (!views.is_object()) throw InputError(where + ": missing views object");
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name(to_string(kViews[i]));
    if (!views.contains(name)) throw InputError(where + ": missing view '" + name + "'");
    const auto& v = views[name];
    s.views[i] = {field<std::string>(v, "rgb", where), field<std::string>(v, "depth", where),
                  field<std::string>(v, "event", where)};
  }
  s.lidar = field<std::string>(j, "lidar", where);
  if (j.contains("qa")) {
    if (!j["qa"].is_array()) throw InputError(where + ": qa must be an array");
    for (const auto& q : j["qa"]) {
      s.qa.push_back({field<std::string>(q, "id", where),
                      parse_level(field<std::string>(q, "level", where)),
                      field<std::string>(q, "question", where),
                      field<std::string>(q, "reference", where)});
    }
  }
  return s;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.scenes.push_back(scene_from_json(line));
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate(m);
  return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::string text;
  for (const auto& s : manifest.scenes) text += scene_to_json(s) + "\n";
  mvxt::write_bytes_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace mvx
