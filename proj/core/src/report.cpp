#include "mvx/report.hpp"

#include <fstream>
#include <json.hpp>
#include <unordered_map>

#include "mvx/error.hpp"
#include "text_table.hpp"

namespace mvx {

using nlohmann::json;

std::vector<PredictionLine> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions " + path.string());
  std::vector<PredictionLine> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw InputError(where + ": not a JSON object");
    if (!j.contains("id") || !j["id"].is_string()) throw InputError(where + ": missing string field 'id'");
    if (!j.contains("prediction") || !j["prediction"].is_string()) {
      throw InputError(where + ": missing string field 'prediction'");
    }
    out.push_back({j["id"].get<std::string>(), j["prediction"].get<std::string>()});
  }
  return out;
}

std::vector<QARecord> resolve_predictions(const Manifest& manifest,
                                          const std::vector<PredictionLine>& predictions,
                                          std::vector<std::string>& unresolved) {
  std::unordered_map<std::string, std::pair<const SceneRecord*, const QAItem*>> index;
  for (const auto& s : manifest.scenes)
    for (const auto& q : s.qa) index[q.id] = {&s, &q};
  std::vector<QARecord> records;
  for (const auto& p : predictions) {
    auto it = index.find(p.id);
    if (it == index.end()) {
      unresolved.push_back(p.id);
      continue;
    }
    const auto& [scene, qa] = it->second;
    QARecord r{qa->id, scene->scene_id, qa->level, scene->condition(), qa->question, qa->reference,
               p.prediction};
    r.validate();
    records.push_back(std::move(r));
  }
  return records;
}

MetricReport evaluate(const Manifest& manifest, const std::vector<PredictionLine>& predictions,
                      const std::optional<JudgeEndpoint>& judge) {
  std::vector<std::string> unresolved;
  const auto records = resolve_predictions(manifest, predictions, unresolved);
  std::vector<std::optional<int>> scores;
  if (judge && !records.empty()) scores = judge_batch(records, *judge).scores;
  MetricReport report = compute_metrics(records, scores);
  report.unresolved_ids = std::move(unresolved);
  return report;
}

namespace {

json cell_json(const MetricCell& c) {
  return {{"count", c.count},
          {"bleu4", c.bleu4},
          {"rouge_l", c.rouge_l},
          {"meteor", c.meteor},
          {"cider", c.cider},
          {"sim", c.sim},
          {"judge", c.judge ? json(*c.judge) : json(nullptr)},
          {"judge_scored", c.judge_scored},
          {"judge_missing", c.judge_missing}};
}

std::vector<std::string> metric_rows(const MetricCell& c) {
  if (c.count == 0) return {"-", "-", "-", "-", "-", "-", "0"};
  return {text::fixed(100.0 * c.bleu4, 2),
          text::fixed(100.0 * c.rouge_l, 2),
          text::fixed(100.0 * c.meteor, 2),
          text::fixed(c.cider, 2),
          text::fixed(100.0 * c.sim, 2),
          c.judge ? text::fixed(*c.judge, 2) : "-",
          std::to_string(c.count)};
}

constexpr const char* kMetricNames[] = {"BLEU-4", "ROUGE-L", "METEOR*", "CIDEr", "Sim", "Judge", "n"};

std::string grid(const std::vector<std::pair<std::string, MetricCell>>& columns) {
  std::vector<std::vector<std::string>> rows(1, std::vector<std::string>{"metric"});
  for (const auto& [name, _] : columns) rows[0].push_back(name);
  std::vector<std::vector<std::string>> values;
  for (const auto& [_, cell] : columns) values.push_back(metric_rows(cell));
  for (std::size_t m = 0; m < std::size(kMetricNames); ++m) {
    std::vector<std::string> row{kMetricNames[m]};
    for (const auto& v : values) row.push_back(v[m]);
    rows.push_back(row);
  }
  return text::aligned_table(rows);
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
  json by_condition = json::object(), by_level = json::object();
  for (const auto& [c, cell] : report.by_condition) by_condition[std::string(to_string(c))] = cell_json(cell);
  for (const auto& [l, cell] : report.by_level) by_level[std::string(to_string(l))] = cell_json(cell);
  json j = {{"total", report.total},
            {"overall", cell_json(report.overall)},
            {"by_condition", by_condition},
            {"by_level", by_level},
            {"unresolved_ids", report.unresolved_ids},
            {"notes", {"METEOR uses exact matching only (no stemming or synonyms)",
                       "Sim is a TF-IDF cosine fitted on the evaluated corpus"}}};
  return j.dump(2) + "\n";
}

std::string report_to_table(const MetricReport& report) {
  std::vector<std::pair<std::string, MetricCell>> by_cond;
  for (Condition c : kAllConditions) {
    auto it = report.by_condition.find(c);
    by_cond.emplace_back(std::string(to_string(c)), it == report.by_condition.end() ? MetricCell{} : it->second);
  }
  by_cond.emplace_back("Overall", report.overall);
  std::vector<std::pair<std::string, MetricCell>> by_level;
  for (auto l : {QuestionLevel::Global, QuestionLevel::Allocentric, QuestionLevel::Egocentric}) {
    auto it = report.by_level.find(l);
    by_level.emplace_back(std::string(to_string(l)), it == report.by_level.end() ? MetricCell{} : it->second);
  }
  std::string out = "by condition (scores x100 except CIDEr)\n" + grid(by_cond);
  out += "\nby question level\n" + grid(by_level);
  out += "\n* METEOR with exact matching only\n";
  if (!report.unresolved_ids.empty()) {
    out += "unresolved ids (" + std::to_string(report.unresolved_ids.size()) + "):";
    for (const auto& id : report.unresolved_ids) out += " " + id;
    out += "\n";
  }
  return out;
}

}  // namespace mvx
