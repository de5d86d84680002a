#pragma once

#include <cstdint>
#include <filesystem>
#include <map>

#include "mvx/aggregation.hpp"
#include "mvx/dca.hpp"
#include "mvx/encoders.hpp"

namespace mvx {

struct ModelConfig {
  DcaDims dca;
  LidarConfig lidar;
  std::size_t grid = 7;  // patch grid side; grid^2 must equal dca.n_native
  std::size_t aggregator_heads = 8;
  std::size_t spectral_kernel = 3;

  // Throws ConfigError on inconsistent dimensions.
  void validate() const;
  AggregatorConfig aggregator(AggregatorKind kind) const;
};

// Every trained-weight tensor of the pipeline. One shared patch projection
// serves all views and camera modalities.
template <typename T>
struct ModelParams {
  ModelConfig config;
  BasicTensor<T> patch_proj;                 // [3, d_enc]
  LidarWeights<BasicTensor<T>> lidar;
  DcaParams<T> dca;
  std::map<AggregatorKind, AggregatorParams<T>> aggregators;  // all four variants

  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  const AggregatorParams<T>& aggregator(AggregatorKind kind) const;

  template <typename U>
  ModelParams<U> cast() const;
};

// A directory of named MVXT tensors plus params.json holding the config and
// the expected shape of every tensor. Loading re-validates every invariant.
void save_params(const ModelParams<double>& params, const std::filesystem::path& dir);
ModelParams<double> load_params(const std::filesystem::path& dir);

}  // namespace mvx
