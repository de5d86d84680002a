#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "mvx/ablation.hpp"
#include "mvx/degradation.hpp"
#include "mvx/error.hpp"
#include "mvx/mvxt.hpp"
#include "mvx/pipeline.hpp"
#include "mvx/report.hpp"
#include "mvx/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

// A command-line value wins over the config file, which wins over the default.
template <typename T>
void merge(T& value, const CLI::Option* opt, const json& config, const char* key) {
  if (opt->count() > 0 || !config.contains(key)) return;
  try {
    value = config.at(key).get<T>();
  } catch (const json::exception&) {
    throw mvx::ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw mvx::ConfigError("cannot open config " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw mvx::ConfigError("config " + path + " is not a JSON object");
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  mvx::mvxt::write_bytes_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

mvx::ModelConfig model_config(const json& config) {
  mvx::ModelConfig c;
  if (!config.contains("model")) return c;
  const json& m = config["model"];
  auto get = [](const json& j, const char* key, std::size_t& v) {
    if (j.contains(key)) v = j[key].get<std::size_t>();
  };
  if (m.contains("dca")) {
    const json& d = m["dca"];
    get(d, "n_native", c.dca.n_native);
    get(d, "n_aligned", c.dca.n_aligned);
    get(d, "d_enc", c.dca.d_enc);
    get(d, "d_model", c.dca.d_model);
    get(d, "heads_spatial", c.dca.heads_spatial);
    get(d, "heads_channel", c.dca.heads_channel);
  }
  if (m.contains("lidar")) {
    const json& l = m["lidar"];
    get(l, "centroids_l1", c.lidar.centroids_l1);
    get(l, "centroids_l2", c.lidar.centroids_l2);
    get(l, "k_neighbors", c.lidar.k_neighbors);
    get(l, "hidden_l1", c.lidar.hidden_l1);
    get(l, "hidden_l2", c.lidar.hidden_l2);
    get(l, "out_dim", c.lidar.out_dim);
  }
  get(m, "grid", c.grid);
  get(m, "aggregator_heads", c.aggregator_heads);
  get(m, "spectral_kernel", c.spectral_kernel);
  c.validate();
  return c;
}

mvx::ModalityMask parse_modalities(const std::vector<std::string>& names) {
  mvx::ModalityMask m{false, false, false, false};
  for (const auto& n : names) {
    if (n == "rgb") m.rgb = true;
    else if (n == "depth") m.depth = true;
    else if (n == "event") m.event = true;
    else if (n == "lidar") m.lidar = true;
    else throw mvx::ConfigError("unknown modality '" + n + "' (expected rgb, depth, event, lidar)");
  }
  return m;
}

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  json config;

  void resolve() {
    config = read_config(config_path);
    merge(seed, seed_opt, config, "seed");
    merge(workers, workers_opt, config, "workers");
    merge(out, out_opt, config, "out");
    if (workers == 0) throw mvx::ConfigError("--workers must be at least 1");
  }
  fs::path require_out() const {
    if (out.empty()) throw mvx::ConfigError("--out is required");
    return out;
  }
};

struct ParamsArgs {
  std::string load;
  std::string save;
  CLI::Option* load_opt = nullptr;
  CLI::Option* save_opt = nullptr;

  void add(CLI::App* cmd) {
    load_opt = cmd->add_option("--params", load, "Load parameters from a directory");
    save_opt = cmd->add_option("--save-params", save, "Save the parameters used to a directory");
  }
  mvx::ModelParams<float> resolve(const Globals& g) {
    merge(load, load_opt, g.config, "params");
    merge(save, save_opt, g.config, "save_params");
    const auto params = load.empty() ? mvx::ModelParams<double>::init(model_config(g.config), g.seed)
                                     : mvx::load_params(load);
    if (!save.empty()) mvx::save_params(params, save);
    return params.cast<float>();
  }
};

void print_failures(const std::vector<mvx::SceneResult>& scenes) {
  for (const auto& s : scenes)
    if (!s.ok()) std::cerr << "scene " << s.scene_id << " failed: " << s.error << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-sensor fusion pipeline: synthetic data, encoders, DCA fusion, ablations, metrics"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file; command-line flags override its keys");
  g.seed_opt = app.add_option("--seed", g.seed, "Seed for parameters, data and noise");
  g.workers_opt = app.add_option("--workers", g.workers, "Scenes processed in parallel");
  g.out_opt = app.add_option("--out", g.out, "Output file or directory");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic manifest with images, clouds and QA");
  synth->fallthrough();
  std::size_t scenes = 10, image_size = 28, lidar_points = 512;
  auto* scenes_opt = synth->add_option("--scenes", scenes, "Number of scenes")->capture_default_str();
  auto* image_opt = synth->add_option("--image-size", image_size, "Image side in pixels")->capture_default_str();
  auto* points_opt = synth->add_option("--lidar-points", lidar_points, "Points per cloud")->capture_default_str();

  // encode
  auto* encode = app.add_subcommand("encode", "Encode every scene and write the encoder grids");
  encode->fallthrough();
  std::string manifest_path;
  std::vector<CLI::Option*> manifest_opts;
  bool no_failures = false;
  manifest_opts.push_back(encode->add_option("--manifest", manifest_path, "manifest.jsonl"));
  ParamsArgs encode_params;
  encode_params.add(encode);

  // degrade
  auto* degrade = app.add_subcommand("degrade", "Apply one sensor failure to an MVXT image or point cloud");
  degrade->fallthrough();
  std::string kind_name, in_path;
  double severity = 0.0;
  auto* kind_opt = degrade->add_option("--kind", kind_name, "mb | oe | ue | lj | el")
                       ->check(CLI::IsMember({"mb", "oe", "ue", "lj", "el"}, CLI::ignore_case));
  auto* severity_opt = degrade->add_option("--severity", severity,
                                           "Kernel length (mb), gain (oe/ue), sigma in meters (lj) or factor (el)");
  auto* in_opt = degrade->add_option("--in", in_path, "Input MVXT file");

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Run the full pipeline and write 5 x d_model tokens per scene");
  fuse->fallthrough();
  manifest_opts.push_back(fuse->add_option("--manifest", manifest_path, "manifest.jsonl"));
  std::string aggregator_name = "qattn";
  std::vector<CLI::Option*> aggregator_opts;
  aggregator_opts.push_back(fuse->add_option("--aggregator", aggregator_name, "gap | qattn | spectral | depthgate")
                                ->check(CLI::IsMember({"gap", "qattn", "spectral", "depthgate"})));
  std::vector<std::string> modalities{"rgb", "depth", "event", "lidar"};
  auto* modalities_opt = fuse->add_option("--modalities", modalities, "Active sensors")->delimiter(',');
  bool no_spatial = false, no_channel = false;
  auto* no_spatial_opt = fuse->add_flag("--no-spatial", no_spatial, "Disable the spatial attention pathway");
  auto* no_channel_opt = fuse->add_flag("--no-channel", no_channel, "Disable the channel attention pathway");
  std::vector<CLI::Option*> no_failures_opts;
  no_failures_opts.push_back(fuse->add_flag("--no-failures", no_failures, "Ignore scene failure tags"));
  ParamsArgs fuse_params;
  fuse_params.add(fuse);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run an ablation plan and report representation statistics");
  ablate->fallthrough();
  manifest_opts.push_back(ablate->add_option("--manifest", manifest_path, "manifest.jsonl"));
  std::string plan_name = "table4";
  auto* plan_opt = ablate->add_option("--plan", plan_name, "table4 (modalities) | table3 (attention components)")
                       ->check(CLI::IsMember({"table4", "table3"}));
  aggregator_opts.push_back(ablate->add_option("--aggregator", aggregator_name, "Aggregator for QAttn runs")
                                ->check(CLI::IsMember({"qattn", "spectral", "depthgate"})));
  bool write_tokens = false;
  ablate->add_flag("--tokens", write_tokens, "Also write per-run token files");
  no_failures_opts.push_back(ablate->add_flag("--no-failures", no_failures, "Ignore scene failure tags"));
  ParamsArgs ablate_params;
  ablate_params.add(ablate);

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against the manifest's references");
  eval->fallthrough();
  manifest_opts.push_back(eval->add_option("--manifest", manifest_path, "manifest.jsonl"));
  std::string predictions_path, judge_url;
  auto* predictions_opt = eval->add_option("--predictions", predictions_path, "Predictions JSONL");
  auto* judge_url_opt = eval->add_option("--judge-url", judge_url, "Rubric judge endpoint http://host:port/path");
  int judge_concurrency = 4;
  auto* judge_conc_opt = eval->add_option("--judge-concurrency", judge_concurrency, "Concurrent judge requests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    g.resolve();
    const json& cfg = g.config;
    auto any_count = [](const std::vector<CLI::Option*>& opts) {
      for (auto* o : opts)
        if (o->count()) return o;
      return opts.front();
    };
    merge(manifest_path, any_count(manifest_opts), cfg, "manifest");
    merge(aggregator_name, any_count(aggregator_opts), cfg, "aggregator");
    merge(no_failures, any_count(no_failures_opts), cfg, "no_failures");
    auto load_manifest = [&]() {
      if (manifest_path.empty()) throw mvx::ConfigError("--manifest is required");
      return mvx::load_manifest(manifest_path);
    };
    mvx::PipelineOptions options;
    options.seed = g.seed;
    options.workers = g.workers;
    options.apply_failures = !no_failures;

    if (synth->parsed()) {
      merge(scenes, scenes_opt, cfg, "scenes");
      merge(image_size, image_opt, cfg, "image_size");
      merge(lidar_points, points_opt, cfg, "lidar_points");
      const fs::path out = g.require_out();
      const auto m = mvx::make_synthetic_manifest(scenes, g.seed, out, {image_size, lidar_points});
      std::cout << "wrote " << m.scenes.size() << " scenes, " << m.qa_count() << " QA records to "
                << (out / "manifest.jsonl").string() << "\n";
      return kExitOk;
    }

    if (encode->parsed()) {
      const auto manifest = load_manifest();
      const auto params = encode_params.resolve(g);
      const fs::path out = g.require_out();
      std::size_t failures = 0;
      for (const auto& scene : manifest.scenes) {
        try {
          const auto enc = mvx::encode_scene(manifest, scene, params, options);
          const fs::path dir = out / scene.scene_id;
          fs::create_directories(dir);
          mvx::mvxt::write(dir / "rgb.mvxt", enc.rgb);
          mvx::mvxt::write(dir / "depth.mvxt", enc.depth);
          mvx::mvxt::write(dir / "event.mvxt", enc.event);
          mvx::mvxt::write(dir / "lidar.mvxt", enc.lidar);
        } catch (const std::exception& e) {
          ++failures;
          std::cerr << "scene " << scene.scene_id << " failed: " << e.what() << "\n";
        }
      }
      std::cout << "encoded " << manifest.scenes.size() - failures << "/" << manifest.scenes.size()
                << " scenes into " << out.string() << "\n";
      return failures ? kExitPartial : kExitOk;
    }

    if (degrade->parsed()) {
      merge(kind_name, kind_opt, cfg, "kind");
      merge(in_path, in_opt, cfg, "in");
      if (kind_name.empty()) throw mvx::ConfigError("--kind is required");
      if (in_path.empty()) throw mvx::ConfigError("--in is required");
      const auto kind = mvx::parse_degradation(kind_name);
      auto spec = mvx::DegradationSpec::defaults(kind, g.seed);
      merge(severity, severity_opt, cfg, "severity");
      if (severity_opt->count() || cfg.contains("severity")) {
        spec = mvx::DegradationSpec::with_severity(kind, severity, g.seed);
      }
      const fs::path out = g.require_out();
      const auto tensor = mvx::mvxt::read<double>(in_path);
      if (spec.targets_lidar()) {
        const auto cloud = mvx::apply(mvx::PointCloud(tensor), spec);
        mvx::mvxt::write(out, cloud.points().cast<float>());
      } else {
        const auto img = mvx::apply(mvx::Image(tensor), spec);
        mvx::mvxt::write(out, img.pixels().cast<float>());
      }
      std::cout << "wrote " << out.string() << "\n";
      return kExitOk;
    }

    if (fuse->parsed()) {
      const auto manifest = load_manifest();
      merge(modalities, modalities_opt, cfg, "modalities");
      if (cfg.contains("pathways")) {
        if (!no_spatial_opt->count()) no_spatial = !cfg["pathways"].value("spatial", true);
        if (!no_channel_opt->count()) no_channel = !cfg["pathways"].value("channel", true);
      }
      mvx::RunSpec run;
      run.modalities = parse_modalities(modalities);
      run.pathways = {!no_spatial, !no_channel};
      run.aggregator = mvx::parse_aggregator(aggregator_name);
      run.validate();
      const auto params = fuse_params.resolve(g);
      const fs::path out = g.require_out();
      const auto result = mvx::run_pipeline(manifest, params, run, options, out);
      print_failures(result.scenes);
      std::cout << "fused " << result.scenes.size() - result.failures << "/" << result.scenes.size()
                << " scenes (" << run.modalities.label() << ", " << mvx::to_string(run.aggregator) << ") in "
                << result.seconds << " s into " << out.string() << "\n";
      return result.failures ? kExitPartial : kExitOk;
    }

    if (ablate->parsed()) {
      const auto manifest = load_manifest();
      merge(plan_name, plan_opt, cfg, "plan");
      const auto aggregator = mvx::parse_aggregator(aggregator_name);
      if (aggregator == mvx::AggregatorKind::Gap) throw mvx::ConfigError("ablation QAttn runs need a query aggregator");
      const auto plan = plan_name == "table3" ? mvx::table3_plan(aggregator) : mvx::table4_plan(aggregator);
      plan.validate();
      const auto params = ablate_params.resolve(g);
      const fs::path out = g.require_out();
      const auto result = mvx::run_ablation(manifest, params, plan, options,
                                            write_tokens ? std::optional(out / "tokens") : std::nullopt);
      const std::string table = mvx::ablation_to_table(result);
      write_text(out / "ablation.json", mvx::ablation_to_json(result));
      write_text(out / "ablation.txt", table);
      std::cout << table;
      for (const auto& e : result.errors) std::cerr << "scene " << e << "\n";
      return result.failures ? kExitPartial : kExitOk;
    }

    if (eval->parsed()) {
      const auto manifest = load_manifest();
      merge(predictions_path, predictions_opt, cfg, "predictions");
      if (predictions_path.empty()) throw mvx::ConfigError("--predictions is required");
      std::optional<mvx::JudgeEndpoint> judge;
      json judge_cfg = cfg.value("judge", json::object());
      merge(judge_url, judge_url_opt, judge_cfg, "url");
      merge(judge_concurrency, judge_conc_opt, judge_cfg, "concurrency");
      if (!judge_url.empty()) {
        mvx::JudgeEndpoint ep;
        ep.url = judge_url;
        ep.concurrency = judge_concurrency;
        ep.model = judge_cfg.value("model", ep.model);
        ep.attempts = judge_cfg.value("attempts", ep.attempts);
        ep.backoff = std::chrono::milliseconds(judge_cfg.value("backoff_ms", ep.backoff.count()));
        ep.timeout = std::chrono::milliseconds(judge_cfg.value("timeout_ms", ep.timeout.count()));
        ep.validate();
        judge = ep;
      }
      const auto report = mvx::evaluate(manifest, mvx::load_predictions(predictions_path), judge);
      const std::string table = mvx::report_to_table(report);
      if (!g.out.empty()) {
        write_text(fs::path(g.out) / "report.json", mvx::report_to_json(report));
        write_text(fs::path(g.out) / "report.txt", table);
      }
      std::cout << table;
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
