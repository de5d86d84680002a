#include "mvx/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include "mvx/error.hpp"
#include "mvx/mvxt.hpp"
#include "mvx/ops.hpp"
#include "mvx/rng.hpp"

namespace mvx {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

void RunSpec::validate() const {
  if (!modalities.any_camera()) throw ConfigError("run '" + name + "' has no active camera modality");
  if (!pathways.spatial && !pathways.channel) {
    throw ConfigError("run '" + name + "' disables both sAttn and cAttn");
  }
}

std::optional<DegradationSpec> failure_degradation(const SceneRecord& scene, std::uint64_t seed) {
  if (!scene.failure) return std::nullopt;
  const std::uint64_t s = derive_seed(seed, fnv1a(scene.scene_id));
  switch (*scene.failure) {
    case Condition::MB: return DegradationSpec::defaults(DegradationKind::MotionBlur, s);
    case Condition::OE: return DegradationSpec::defaults(DegradationKind::Overexposure, s);
    case Condition::UE: return DegradationSpec::defaults(DegradationKind::Underexposure, s);
    case Condition::LJ: return DegradationSpec::defaults(DegradationKind::LidarJitter, s);
    case Condition::EL: return DegradationSpec::defaults(DegradationKind::EventLowRes, s);
    default: return std::nullopt;
  }
}

EncodedScene encode_scene(const Manifest& manifest, const SceneRecord& scene,
                          const ModelParams<float>& params, const PipelineOptions& options) {
  const auto degradation = options.apply_failures ? failure_degradation(scene, options.seed) : std::nullopt;
  const auto kind = degradation ? std::optional(degradation->kind) : std::nullopt;
  const bool degrade_rgb = kind == DegradationKind::MotionBlur || kind == DegradationKind::Overexposure ||
                           kind == DegradationKind::Underexposure;
  const bool degrade_event = kind == DegradationKind::EventLowRes;
  const bool degrade_lidar = kind == DegradationKind::LidarJitter;

  auto load = [&](const std::string& rel, Modality m, View v, bool degrade) {
    Image img(mvxt::read<double>(manifest.resolve(rel)));
    if (degrade) img = apply(img, *degradation);
    return encode_image<float>(img, m, v, params.config.grid, params.patch_proj).values;
  };
  std::vector<TensorF> rgb, depth, event;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& files = scene.views[i];
    rgb.push_back(load(files.rgb, Modality::Rgb, kViews[i], degrade_rgb));
    depth.push_back(load(files.depth, Modality::Depth, kViews[i], false));
    event.push_back(load(files.event, Modality::Event, kViews[i], degrade_event));
  }
  PointCloud cloud(mvxt::read<double>(manifest.resolve(scene.lidar)));
  if (degrade_lidar) cloud = apply(cloud, *degradation);

  EncodedScene out;
  out.rgb = ops::concat<float>(rgb, 0);
  out.depth = ops::concat<float>(depth, 0);
  out.event = ops::concat<float>(event, 0);
  out.lidar = encode_lidar<float>(cloud, params.lidar, params.config.lidar);
  return out;
}

TensorF fuse_scene(const EncodedScene& scene, const ModelParams<float>& params, const RunSpec& run) {
  run.validate();
  DcaInputs<float> inputs{scene.rgb, scene.depth, scene.event};
  const auto trace = dca_forward(inputs, run.modalities, params.dca, run.pathways);
  const TensorF views =
      aggregate(trace.fused.value(), trace.depth.value(), params.aggregator(run.effective_aggregator()));
  const std::size_t D = params.config.dca.d_model;
  const TensorF lidar = run.modalities.lidar ? scene.lidar.reshape({1, D}) : TensorF::zeros({1, D});
  const TensorF parts[] = {views, lidar};
  return ops::concat<float>(parts, 0);
}

EncodedScene zero_masked(const EncodedScene& scene, const ModalityMask& mask) {
  EncodedScene out = scene;
  if (!mask.rgb) out.rgb = TensorF::zeros(scene.rgb.shape());
  if (!mask.depth) out.depth = TensorF::zeros(scene.depth.shape());
  if (!mask.event) out.event = TensorF::zeros(scene.event.shape());
  if (!mask.lidar) out.lidar = TensorF::zeros(scene.lidar.shape());
  return out;
}

PipelineResult run_pipeline(const Manifest& manifest, const ModelParams<float>& params,
                            const RunSpec& run, const PipelineOptions& options,
                            const std::optional<std::filesystem::path>& out_dir) {
  run.validate();
  params.config.validate();
  params.aggregator(run.effective_aggregator());
  if (out_dir) std::filesystem::create_directories(*out_dir);

  const auto start = std::chrono::steady_clock::now();
  PipelineResult result;
  result.scenes.resize(manifest.scenes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < manifest.scenes.size(); i = next++) {
      const auto& scene = manifest.scenes[i];
      auto& out = result.scenes[i];
      out.scene_id = scene.scene_id;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        out.tokens = fuse_scene(encode_scene(manifest, scene, params, options), params, run);
        if (out_dir) mvxt::write(*out_dir / (scene.scene_id + ".mvxt"), out.tokens);
      } catch (const std::exception& e) {
        out.tokens = {};
        out.error = e.what();
      }
      out.seconds = elapsed(t0);
    }
  };
  const std::size_t n = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(1, manifest.scenes.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (const auto& s : result.scenes) result.failures += !s.ok();
  result.seconds = elapsed(start);
  return result;
}

}  // namespace mvx
