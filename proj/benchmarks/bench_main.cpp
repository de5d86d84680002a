#include <benchmark/benchmark.h>

#include "mvx/aggregation.hpp"
#include "mvx/dca.hpp"
#include "mvx/encoders.hpp"
#include "mvx/eval.hpp"
#include "mvx/rng.hpp"

namespace {

mvx::TensorF random_grid(mvx::Shape shape, std::uint64_t seed) {
  mvx::Rng rng(seed);
  mvx::TensorF t(std::move(shape));
  for (auto& v : t.mutable_data()) v = static_cast<float>(rng.normal());
  return t;
}

void BM_DcaForward(benchmark::State& state) {
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  const auto params = mvx::DcaParams<float>::init({}, 1);
  const auto r = random_grid({batch, 49, 512}, 2), d = random_grid({batch, 49, 512}, 3),
             e = random_grid({batch, 49, 512}, 4);
  for (auto _ : state) {
    auto t = mvx::dca_forward<float>({r, d, e}, {}, params);
    benchmark::DoNotOptimize(t.fused.value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_DcaForward)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Aggregate(benchmark::State& state) {
  const auto kind = static_cast<mvx::AggregatorKind>(state.range(0));
  const auto params = mvx::AggregatorParams<float>::init({kind, 512, 8, 3}, 5);
  const auto fused = random_grid({4, 48, 512}, 6), depth = random_grid({4, 48, 512}, 7);
  for (auto _ : state) {
    auto out = mvx::aggregate(fused, depth, params);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetLabel(std::string(mvx::to_string(kind)));
}
BENCHMARK(BM_Aggregate)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_EncodeLidar(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  mvx::Rng rng(8);
  mvx::Tensor pts({n, 3});
  for (auto& v : pts.mutable_data()) v = rng.uniform(-40.0, 40.0);
  const mvx::PointCloud cloud(pts);
  const auto weights = mvx::init_lidar_weights<float>({}, 9);
  for (auto _ : state) {
    auto out = mvx::encode_lidar<float>(cloud, weights);
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_EncodeLidar)->Arg(512)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& state) {
  mvx::Rng rng(10);
  const std::vector<std::string> vocab = {"the", "a", "car", "truck", "left", "right", "stops", "turns",
                                          "lane", "road", "two", "one", "pedestrian", "cyclist"};
  std::vector<mvx::QARecord> records(static_cast<std::size_t>(state.range(0)));
  for (auto& r : records) {
    for (int i = 0; i < 10; ++i) r.reference += vocab[rng.below(vocab.size())] + " ";
    for (int i = 0; i < 10; ++i) r.prediction += vocab[rng.below(vocab.size())] + " ";
    r.question = "q";
    r.condition = mvx::kAllConditions[rng.below(10)];
  }
  for (auto _ : state) {
    auto report = mvx::compute_metrics(records);
    benchmark::DoNotOptimize(report.overall.bleu4);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Metrics)->Arg(1300)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
