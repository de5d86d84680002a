#include "mvx/model.hpp"

#include <json.hpp>
#include <set>

#include "mvx/error.hpp"
#include "mvx/mvxt.hpp"
#include "mvx/rng.hpp"

namespace mvx {

using nlohmann::json;

namespace {

constexpr AggregatorKind kAllAggregators[] = {AggregatorKind::Gap, AggregatorKind::QAttn,
                                              AggregatorKind::SpectralQAttn,
                                              AggregatorKind::DepthGateQAttn};

}  // namespace

void ModelConfig::validate() const {
  validate_dims(dca);
  if (grid == 0 || grid * grid != dca.n_native) {
    throw ConfigError("patch grid " + std::to_string(grid) + "x" + std::to_string(grid) +
                      " does not produce n_native = " + std::to_string(dca.n_native) + " tokens");
  }
  if (lidar.out_dim != dca.d_model) throw ConfigError("lidar out_dim must equal d_model");
  if (lidar.centroids_l1 == 0 || lidar.centroids_l2 == 0 || lidar.k_neighbors == 0) {
    throw ConfigError("lidar centroid and neighbour counts must be positive");
  }
  if (aggregator_heads == 0 || dca.d_model % aggregator_heads != 0) {
    throw ConfigError("aggregator heads must divide d_model");
  }
  if (spectral_kernel % 2 == 0) throw ConfigError("spectral kernel length must be odd");
}

AggregatorConfig ModelConfig::aggregator(AggregatorKind kind) const {
  return {kind, dca.d_model, aggregator_heads, spectral_kernel};
}

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::map<AggregatorKind, AggregatorParams<T>> aggs;
  for (auto kind : kAllAggregators) {
    aggs.emplace(kind, AggregatorParams<T>::init(config.aggregator(kind),
                                                 derive_seed(seed, 10 + static_cast<int>(kind))));
  }
  return ModelParams<T>{config,
                        init_patch_projection<T>(config.dca.d_enc, derive_seed(seed, 1)),
                        init_lidar_weights<T>(config.lidar, derive_seed(seed, 2)),
                        DcaParams<T>::init(config.dca, derive_seed(seed, 3)),
                        std::move(aggs)};
}

template <typename T>
const AggregatorParams<T>& ModelParams<T>::aggregator(AggregatorKind kind) const {
  auto it = aggregators.find(kind);
  if (it == aggregators.end()) throw ConfigError("no parameters for aggregator " + std::string(to_string(kind)));
  return it->second;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  auto conv = [](const char*, const BasicTensor<T>& src, BasicTensor<U>& dst) { dst = src.template cast<U>(); };
  BasicTensor<U> patch = patch_proj.template cast<U>();
  LidarWeights<BasicTensor<U>> lw;
  LidarWeights<BasicTensor<T>>::visit(conv, lidar, lw);
  DcaWeights<BasicTensor<U>> dw;
  DcaWeights<BasicTensor<T>>::visit(conv, dca.weights(), dw);
  std::map<AggregatorKind, AggregatorParams<U>> aggs;
  for (const auto& [kind, p] : aggregators) {
    AggregatorWeights<BasicTensor<U>> aw;
    AggregatorWeights<BasicTensor<T>>::visit(conv, p.weights(), aw);
    aggs.emplace(kind, AggregatorParams<U>(p.config(), std::move(aw)));
  }
  return ModelParams<U>{config, std::move(patch), std::move(lw), DcaParams<U>(dca.dims(), std::move(dw)),
                        std::move(aggs)};
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

namespace {

json config_to_json(const ModelConfig& c) {
  return {{"dca",
           {{"n_native", c.dca.n_native},
            {"n_aligned", c.dca.n_aligned},
            {"d_enc", c.dca.d_enc},
            {"d_model", c.dca.d_model},
            {"heads_spatial", c.dca.heads_spatial},
            {"heads_channel", c.dca.heads_channel}}},
          {"lidar",
           {{"centroids_l1", c.lidar.centroids_l1},
            {"centroids_l2", c.lidar.centroids_l2},
            {"k_neighbors", c.lidar.k_neighbors},
            {"hidden_l1", c.lidar.hidden_l1},
            {"hidden_l2", c.lidar.hidden_l2},
            {"out_dim", c.lidar.out_dim}}},
          {"grid", c.grid},
          {"aggregator_heads", c.aggregator_heads},
          {"spectral_kernel", c.spectral_kernel}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    const auto& d = j.at("dca");
    c.dca = {d.at("n_native").get<std::size_t>(), d.at("n_aligned").get<std::size_t>(),
             d.at("d_enc").get<std::size_t>(),    d.at("d_model").get<std::size_t>(),
             d.at("heads_spatial").get<std::size_t>(), d.at("heads_channel").get<std::size_t>()};
    const auto& l = j.at("lidar");
    c.lidar = {l.at("centroids_l1").get<std::size_t>(), l.at("centroids_l2").get<std::size_t>(),
               l.at("k_neighbors").get<std::size_t>(),  l.at("hidden_l1").get<std::size_t>(),
               l.at("hidden_l2").get<std::size_t>(),    l.at("out_dim").get<std::size_t>()};
    c.grid = j.at("grid").get<std::size_t>();
    c.aggregator_heads = j.at("aggregator_heads").get<std::size_t>();
    c.spectral_kernel = j.at("spectral_kernel").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("params.json: bad config: ") + e.what());
  }
  return c;
}

}  // namespace

void save_params(const ModelParams<double>& params, const std::filesystem::path& dir) {
  params.config.validate();
  std::filesystem::create_directories(dir);
  json shapes = json::object();
  auto write = [&](const std::string& name, const Tensor& t) {
    if (t.empty()) return;
    mvxt::write(dir / (name + ".mvxt"), t);
    shapes[name] = t.shape();
  };
  write("patch_proj", params.patch_proj);
  LidarWeights<Tensor>::visit([&](const char* name, const Tensor& t) { write(std::string("lidar.") + name, t); },
                              params.lidar);
  DcaWeights<Tensor>::visit([&](const char* name, const Tensor& t) { write(std::string("dca.") + name, t); },
                            params.dca.weights());
  for (const auto& [kind, p] : params.aggregators) {
    const std::string prefix = "aggregator." + std::string(to_string(kind)) + ".";
    AggregatorWeights<Tensor>::visit([&](const char* name, const Tensor& t) { write(prefix + name, t); },
                                     p.weights());
  }
  json doc = {{"format", "mvx-params"}, {"version", 1}, {"config", config_to_json(params.config)},
              {"tensors", shapes}};
  const std::string text = doc.dump(2) + "\n";
  mvxt::write_bytes_atomic(dir / "params.json",
                           std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ModelParams<double> load_params(const std::filesystem::path& dir) {
  const auto bytes = mvxt::read_bytes(dir / "params.json");
  json doc = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ConfigError("params.json is not valid JSON");
  if (doc.value("format", "") != "mvx-params" || doc.value("version", 0) != 1) {
    throw ConfigError("params.json has an unknown format or version");
  }
  const ModelConfig config = config_from_json(doc.value("config", json::object()));
  config.validate();
  const json shapes = doc.value("tensors", json::object());
  // A freshly initialised bundle supplies the expected names and shapes.
  ModelParams<double> expected = ModelParams<double>::init(config, 0);
  std::set<std::string> seen;
  auto load = [&](const std::string& name, const Tensor& want, Tensor& out) {
    if (want.empty()) return;
    if (!shapes.contains(name)) throw ConfigError("params.json lacks tensor '" + name + "'");
    const Shape declared = shapes[name].get<Shape>();
    if (declared != want.shape()) {
      throw ConfigError("tensor '" + name + "' declared " + shape_str(declared) + ", expected " +
                        shape_str(want.shape()));
    }
    Tensor t = mvxt::read<double>(dir / (name + ".mvxt"));
    if (t.shape() != declared) throw ConfigError("tensor file '" + name + "' does not match its declared shape");
    out = std::move(t);
    seen.insert(name);
  };

  BasicTensor<double> patch;
  LidarWeights<Tensor> lidar;
  load("patch_proj", expected.patch_proj, patch);
  LidarWeights<Tensor>::visit(
      [&](const char* name, const Tensor& want, Tensor& out) { load(std::string("lidar.") + name, want, out); },
      expected.lidar, lidar);
  DcaWeights<Tensor> dw;
  DcaWeights<Tensor>::visit(
      [&](const char* name, const Tensor& want, Tensor& out) { load(std::string("dca.") + name, want, out); },
      expected.dca.weights(), dw);
  std::map<AggregatorKind, AggregatorParams<double>> aggs;
  for (const auto& [kind, p] : expected.aggregators) {
    const std::string prefix = "aggregator." + std::string(to_string(kind)) + ".";
    AggregatorWeights<Tensor> aw;
    AggregatorWeights<Tensor>::visit(
        [&](const char* name, const Tensor& want, Tensor& out) { load(prefix + name, want, out); },
        p.weights(), aw);
    aggs.emplace(kind, AggregatorParams<double>(p.config(), std::move(aw)));
  }
  for (const auto& [name, _] : shapes.items()) {
    if (!seen.count(name)) throw ConfigError("params.json lists unexpected tensor '" + name + "'");
  }
  return ModelParams<double>{config, std::move(patch), std::move(lidar),
                             DcaParams<double>(config.dca, std::move(dw)), std::move(aggs)};
}

}  // namespace mvx
