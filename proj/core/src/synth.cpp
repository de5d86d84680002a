#include "mvx/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "mvx/error.hpp"
#include "mvx/mvxt.hpp"
#include "mvx/rng.hpp"

namespace mvx {

namespace {

struct FailureShare {
  Condition tag;
  double share;
};

constexpr double kFailureFraction = 0.355;
constexpr FailureShare kFailureShares[] = {{Condition::MB, 0.427}, {Condition::UE, 0.142},
                                           {Condition::OE, 0.143}, {Condition::LJ, 0.142},
                                           {Condition::EL, 0.146}};

const char* weather_word(Condition c) {
  switch (c) {
    case Condition::CL: return "cloudy";
    case Condition::FG: return "foggy";
    case Condition::NT: return "night";
    case Condition::RN: return "rainy";
    case Condition::SN: return "sunny";
    default: return "unknown";
  }
}

double brightness(Condition c) {
  switch (c) {
    case Condition::SN: return 0.85;
    case Condition::CL: return 0.6;
    case Condition::FG: return 0.7;
    case Condition::RN: return 0.5;
    case Condition::NT: return 0.2;
    default: return 0.5;
  }
}

constexpr const char* kObjectTypes[] = {"car", "truck", "pedestrian", "cyclist"};

struct SceneObject {
  std::size_t type;
  std::size_t view;  // index into kViews
  double distance;   // meters
  double offset;     // lateral position within the view, [-1, 1]
};

// Largest-remainder apportionment of total items over the shares.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& shares) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    used += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total; ++k, ++used) ++counts[remainders[k % remainders.size()].second];
  return counts;
}

Tensor make_camera(Rng& rng, std::size_t size, std::size_t channels, Condition weather,
                   const std::vector<SceneObject>& objects, std::size_t view, char modality) {
  Tensor img({size, size, channels});
  auto px = img.mutable_data();
  const double base = brightness(weather);
  const double fog = weather == Condition::FG ? 0.5 : 0.0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double v = static_cast<double>(y) / static_cast<double>(size - 1);
      for (std::size_t c = 0; c < channels; ++c) {
        double value = 0.0;
        if (modality == 'r') value = base * (0.4 + 0.6 * v) + 0.05 * (rng.uniform() - 0.5) + 0.05 * c;
        if (modality == 'd') value = 1.0 - 0.8 * v;
        if (modality == 'e') value = rng.uniform() < 0.05 ? 1.0 : 0.0;
        px[(y * size + x) * channels + c] = value;
      }
    }
  }
  for (const auto& o : objects) {
    if (o.view != view) continue;
    const double scale = std::clamp(8.0 / o.distance, 0.08, 0.45);
    const auto half = static_cast<std::size_t>(std::max(1.0, scale * static_cast<double>(size) / 2.0));
    const auto cx = static_cast<std::size_t>((o.offset + 1.0) / 2.0 * static_cast<double>(size - 1));
    const std::size_t cy = size / 2 + size / 8;
    const std::size_t x0 = cx > half ? cx - half : 0, x1 = std::min(size - 1, cx + half);
    const std::size_t y0 = cy > half ? cy - half : 0, y1 = std::min(size - 1, cy + half);
    const double tone = 0.2 + 0.15 * static_cast<double>(o.type);
    for (std::size_t y = y0; y <= y1; ++y) {
      for (std::size_t x = x0; x <= x1; ++x) {
        for (std::size_t c = 0; c < channels; ++c) {
          double& p = px[(y * size + x) * channels + c];
          if (modality == 'r') p = tone * (0.5 + base) + 0.1 * c;
          if (modality == 'd') p = std::min(1.0, o.distance / 50.0);
          if (modality == 'e' && (y == y0 || y == y1 || x == x0 || x == x1)) p = 1.0;
        }
      }
    }
  }
  for (auto& p : px) {
    if (modality == 'r') p = p * (1.0 - fog) + fog * 0.8;
    p = std::clamp(p, 0.0, 1.0);
  }
  return img;
}

Tensor make_lidar(Rng& rng, std::size_t n, const std::vector<SceneObject>& objects) {
  Tensor pts({n, 3});
  auto p = pts.mutable_data();
  const std::size_t per_object = objects.empty() ? 0 : std::min<std::size_t>(24, n / (2 * objects.size()));
  std::size_t i = 0;
  for (const auto& o : objects) {
    // Views face +x (front), -x (back), +y (left), -y (right).
    const double angle = std::array<double, 4>{0.0, M_PI, M_PI / 2, -M_PI / 2}[o.view] - o.offset * 0.6;
    const double ox = o.distance * std::cos(angle), oy = o.distance * std::sin(angle);
    for (std::size_t k = 0; k < per_object; ++k, ++i) {
      p[3 * i] = ox + rng.uniform(-1.0, 1.0);
      p[3 * i + 1] = oy + rng.uniform(-1.0, 1.0);
      p[3 * i + 2] = rng.uniform(-1.5, 0.2);
    }
  }
  for (; i < n; ++i) {
    p[3 * i] = rng.uniform(-40.0, 40.0);
    p[3 * i + 1] = rng.uniform(-40.0, 40.0);
    p[3 * i + 2] = -1.7 + 0.05 * rng.normal();
  }
  return pts;
}

std::string round_meters(double d) { return std::to_string(static_cast<int>(std::lround(d))); }

std::vector<QAItem> make_qa(const std::string& scene_id, Condition weather,
                            const std::vector<SceneObject>& objects) {
  std::vector<QAItem> qa;
  auto add = [&](QuestionLevel level, std::string q, std::string a) {
    char id[16];
    std::snprintf(id, sizeof(id), "-q%02zu", qa.size());
    qa.push_back({scene_id + id, level, std::move(q), std::move(a)});
  };
  const auto nearest = std::min_element(objects.begin(), objects.end(),
                                        [](const auto& a, const auto& b) { return a.distance < b.distance; });

  add(QuestionLevel::Global, "What is the weather condition in this scene?",
      std::string("The weather in this scene is ") + weather_word(weather) + ".");
  add(QuestionLevel::Global, "How many road users are around the ego vehicle?",
      "There are " + std::to_string(objects.size()) + " road users around the ego vehicle.");

  for (std::size_t v = 0; v < 4; ++v) {
    const std::string view(to_string(kViews[v]));
    std::vector<const SceneObject*> in_view;
    for (const auto& o : objects)
      if (o.view == v) in_view.push_back(&o);
    add(QuestionLevel::Allocentric, "How many road users are visible in the " + view + " view?",
        "There are " + std::to_string(in_view.size()) + " road users in the " + view + " view.");
    if (in_view.empty()) {
      add(QuestionLevel::Allocentric, "What is the closest object in the " + view + " view?",
          "There is no road user in the " + view + " view.");
    } else {
      const auto* c = *std::min_element(in_view.begin(), in_view.end(),
                                        [](auto a, auto b) { return a->distance < b->distance; });
      add(QuestionLevel::Allocentric, "What is the closest object in the " + view + " view?",
          std::string("The closest object in the ") + view + " view is a " + kObjectTypes[c->type] +
              " about " + round_meters(c->distance) + " meters away.");
    }
  }

  const bool close_front = std::any_of(objects.begin(), objects.end(),
                                       [](const auto& o) { return o.view == 0 && o.distance < 12.0; });
  const bool left_busy = std::any_of(objects.begin(), objects.end(),
                                     [](const auto& o) { return o.view == 2 && o.distance < 15.0; });
  add(QuestionLevel::Egocentric, "Is it safe for the ego vehicle to change to the left lane?",
      left_busy ? "No, a road user is close on the left side." : "Yes, the left side is clear.");
  add(QuestionLevel::Egocentric, "What should the ego vehicle do next?",
      close_front ? "The ego vehicle should slow down because a road user is close ahead."
                  : "The ego vehicle can keep its current speed.");
  if (nearest == objects.end()) {
    add(QuestionLevel::Egocentric, "Where is the nearest road user relative to the ego vehicle?",
        "There is no road user near the ego vehicle.");
  } else {
    add(QuestionLevel::Egocentric, "Where is the nearest road user relative to the ego vehicle?",
        std::string("The nearest road user is a ") + kObjectTypes[nearest->type] + " to the " +
            std::string(to_string(kViews[nearest->view])) + " about " + round_meters(nearest->distance) +
            " meters away.");
  }
  return qa;
}

}  // namespace

Manifest make_synthetic_manifest(std::size_t n_scenes, std::uint64_t seed,
                                 const std::filesystem::path& out_dir, const SynthOptions& options) {
  if (n_scenes == 0) throw ConfigError("synthetic manifest needs at least one scene");
  if (options.image_size < 7) throw ConfigError("synthetic images must be at least 7x7");
  if (options.lidar_points == 0) throw ConfigError("synthetic clouds need at least one point");

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "scenes", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "scenes").string() + ": " + ec.message());

  Rng layout(derive_seed(seed, 0));
  std::vector<Condition> weather(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i) weather[i] = kWeatherConditions[i % 5];
  layout.shuffle(weather);

  std::vector<std::optional<Condition>> failure(n_scenes);
  std::vector<double> shares;
  for (const auto& f : kFailureShares) shares.push_back(f.share);
  const auto n_failed = static_cast<std::size_t>(std::lround(kFailureFraction * static_cast<double>(n_scenes)));
  const auto counts = apportion(n_failed, shares);
  std::size_t slot = 0;
  for (std::size_t k = 0; k < counts.size(); ++k)
    for (std::size_t c = 0; c < counts[k]; ++c) failure[slot++] = kFailureShares[k].tag;
  layout.shuffle(failure);

  std::vector<std::string> split(n_scenes, "train");
  std::vector<std::size_t> order(n_scenes);
  std::iota(order.begin(), order.end(), 0);
  layout.shuffle(order);
  const auto n_val = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n_scenes)));
  const auto n_test = n_val;
  for (std::size_t k = 0; k < n_val + n_test && k < n_scenes; ++k) split[order[n_scenes - 1 - k]] = k < n_val ? "val" : "test";

  Manifest manifest;
  manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < n_scenes; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04zu", i);
    SceneRecord scene;
    scene.scene_id = name;
    scene.split = split[i];
    scene.weather = weather[i];
    scene.failure = failure[i];

    Rng rng(derive_seed(seed, 1000 + i));
    std::vector<SceneObject> objects(1 + rng.below(6));
    for (auto& o : objects) o = {rng.below(4), rng.below(4), rng.uniform(4.0, 40.0), rng.uniform(-0.8, 0.8)};

    const std::filesystem::path rel = std::filesystem::path("scenes") / name;
    std::filesystem::create_directories(out_dir / rel, ec);
    if (ec) throw IoError("cannot create " + (out_dir / rel).string() + ": " + ec.message());
    for (std::size_t v = 0; v < 4; ++v) {
      const std::string view(to_string(kViews[v]));
      auto write = [&](const char* mod, std::size_t channels, char kind) {
        const auto file = rel / (view + "_" + mod + ".mvxt");
        mvxt::write(out_dir / file,
                    make_camera(rng, options.image_size, channels, scene.weather, objects, v, kind).cast<float>());
        return file.generic_string();
      };
      scene.views[v].rgb = write("rgb", 3, 'r');
      scene.views[v].depth = write("depth", 1, 'd');
      scene.views[v].event = write("event", 1, 'e');
    }
    const auto lidar = rel / "lidar.mvxt";
    mvxt::write(out_dir / lidar, make_lidar(rng, options.lidar_points, objects).cast<float>());
    scene.lidar = lidar.generic_string();
    scene.qa = make_qa(scene.scene_id, scene.weather, objects);
    manifest.scenes.push_back(std::move(scene));
  }
  validate(manifest);
  save_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

}  // namespace mvx
