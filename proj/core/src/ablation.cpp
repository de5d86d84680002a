#include "mvx/ablation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <mutex>
#include <set>
#include <thread>

#include "mvx/error.hpp"
#include "mvx/mvxt.hpp"
#include "text_table.hpp"

namespace mvx {

namespace {

std::string components(const RunSpec& r) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(r.pathways.spatial, "sAttn");
  add(r.pathways.channel, "cAttn");
  add(r.query_attention, "QAttn");
  return out;
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * double(b[i]);
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  if (na == 0.0 && nb == 0.0) return 0.0;
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / std::sqrt(na * nb);
}

double norm(std::span<const float> a) {
  double s = 0.0;
  for (float x : a) s += double(x) * double(x);
  return std::sqrt(s);
}

}  // namespace

void AblationPlan::validate() const {
  if (runs.empty()) throw ConfigError("ablation plan has no runs");
  std::set<std::string> names;
  for (const auto& r : runs) {
    r.validate();
    if (!names.insert(r.name).second) throw ConfigError("duplicate run name '" + r.name + "'");
  }
}

AblationPlan table4_plan(AggregatorKind aggregator) {
  AblationPlan plan;
  const struct {
    const char* name;
    bool rgb, depth, event;
  } rows[] = {{"RD", true, true, false}, {"RE", true, false, true}, {"DE", false, true, true},
              {"RDE", true, true, true}};
  for (bool lidar : {false, true}) {
    for (const auto& r : rows) {
      RunSpec run;
      run.name = std::string(r.name) + (lidar ? "+L" : "");
      run.modalities = {r.rgb, r.depth, r.event, lidar};
      run.aggregator = aggregator;
      plan.runs.push_back(run);
    }
  }
  return plan;
}

AblationPlan table3_plan(AggregatorKind aggregator) {
  AblationPlan plan;
  const struct {
    const char* name;
    bool s, c, q;
  } rows[] = {{"s", true, false, false},  {"s+Q", true, false, true}, {"c", false, true, false},
              {"c+Q", false, true, true}, {"s+c", true, true, false},  {"s+c+Q", true, true, true}};
  for (const auto& r : rows) {
    RunSpec run;
    run.name = r.name;
    run.pathways = {r.s, r.c};
    run.query_attention = r.q;
    run.aggregator = aggregator;
    plan.runs.push_back(run);
  }
  return plan;
}

AblationResult run_ablation(const Manifest& manifest, const ModelParams<float>& params,
                            const AblationPlan& plan, const PipelineOptions& options,
                            const std::optional<std::filesystem::path>& out_dir) {
  plan.validate();
  params.config.validate();
  for (const auto& r : plan.runs) params.aggregator(r.effective_aggregator());
  if (out_dir) {
    for (const auto& r : plan.runs) std::filesystem::create_directories(*out_dir / r.name);
  }

  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_scenes = manifest.scenes.size(), n_runs = plan.runs.size();
  std::vector<std::vector<TensorF>> tokens(n_runs, std::vector<TensorF>(n_scenes));
  std::vector<std::vector<double>> run_seconds(n_runs, std::vector<double>(n_scenes, 0.0));
  std::vector<std::string> scene_error(n_scenes);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t s = next++; s < n_scenes; s = next++) {
      const auto& scene = manifest.scenes[s];
      std::size_t r = 0;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const EncodedScene enc = encode_scene(manifest, scene, params, options);
        const double encode_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (; r < n_runs; ++r) {
          const auto t1 = std::chrono::steady_clock::now();
          tokens[r][s] = fuse_scene(enc, params, plan.runs[r]);
          if (out_dir) mvxt::write(*out_dir / plan.runs[r].name / (scene.scene_id + ".mvxt"), tokens[r][s]);
          run_seconds[r][s] = encode_s + std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
        }
      } catch (const std::exception& e) {
        scene_error[s] = e.what();
        for (auto& per_run : tokens) per_run[s] = {};
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(1, n_scenes));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  AblationResult result;
  for (std::size_t s = 0; s < n_scenes; ++s) {
    if (!scene_error[s].empty()) {
      ++result.failures;
      result.errors.push_back(manifest.scenes[s].scene_id + ": " + scene_error[s]);
    }
  }
  const std::size_t D = params.config.dca.d_model;
  for (std::size_t r = 0; r < n_runs; ++r) {
    const auto& run = plan.runs[r];
    RunStats st;
    st.name = run.name;
    st.modalities = run.modalities.label();
    st.components = components(run);
    st.aggregator = std::string(to_string(run.effective_aggregator()));
    double view_sum = 0.0, lidar_sum = 0.0;
    for (std::size_t s = 0; s < n_scenes; ++s) {
      st.seconds += run_seconds[r][s];
      if (tokens[r][s].empty()) {
        ++st.scenes_failed;
        continue;
      }
      ++st.scenes_ok;
      const auto data = tokens[r][s].data();
      for (std::size_t v = 0; v < 4; ++v) view_sum += norm(data.subspan(v * D, D));
      lidar_sum += norm(data.subspan(4 * D, D));
    }
    if (st.scenes_ok) {
      st.mean_view_norm = view_sum / (4.0 * double(st.scenes_ok));
      st.mean_lidar_norm = lidar_sum / double(st.scenes_ok);
    }
    result.runs.push_back(st);
  }
  result.cosine_distance.assign(n_runs, std::vector<double>(n_runs, 0.0));
  for (std::size_t i = 0; i < n_runs; ++i) {
    for (std::size_t j = i + 1; j < n_runs; ++j) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t s = 0; s < n_scenes; ++s) {
        if (tokens[i][s].empty() || tokens[j][s].empty()) continue;
        for (std::size_t t = 0; t < 5; ++t) {
          sum += cosine_distance(tokens[i][s].data().subspan(t * D, D), tokens[j][s].data().subspan(t * D, D));
          ++count;
        }
      }
      result.cosine_distance[i][j] = result.cosine_distance[j][i] = count ? sum / double(count) : 0.0;
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string ablation_to_json(const AblationResult& result) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : result.runs) {
    runs.push_back({{"name", r.name},
                    {"modalities", r.modalities},
                    {"components", r.components},
                    {"aggregator", r.aggregator},
                    {"scenes_ok", r.scenes_ok},
                    {"scenes_failed", r.scenes_failed},
                    {"mean_view_norm", r.mean_view_norm},
                    {"mean_lidar_norm", r.mean_lidar_norm},
                    {"seconds", r.seconds}});
  }
  nlohmann::json j = {{"runs", runs},
                      {"cosine_distance", result.cosine_distance},
                      {"errors", result.errors},
                      {"failures", result.failures},
                      {"seconds", result.seconds}};
  return j.dump(2) + "\n";
}

std::string ablation_to_table(const AblationResult& result) {
  std::vector<std::vector<std::string>> rows = {
      {"run", "modalities", "components", "aggregator", "ok", "failed", "view_norm", "lidar_norm", "seconds"}};
  for (const auto& r : result.runs) {
    rows.push_back({r.name, r.modalities, r.components, r.aggregator, std::to_string(r.scenes_ok),
                    std::to_string(r.scenes_failed), text::fixed(r.mean_view_norm), text::fixed(r.mean_lidar_norm),
                    text::fixed(r.seconds, 2)});
  }
  std::string out = text::aligned_table(rows);
  out += "\nmean cosine distance between runs\n";
  std::vector<std::vector<std::string>> matrix(1, std::vector<std::string>{""});
  for (const auto& r : result.runs) matrix[0].push_back(r.name);
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    std::vector<std::string> row{result.runs[i].name};
    for (double d : result.cosine_distance[i]) row.push_back(text::fixed(d));
    matrix.push_back(row);
  }
  out += text::aligned_table(matrix);
  return out;
}

}  // namespace mvx
