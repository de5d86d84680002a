#include <gtest/gtest.h>

#include <set>

#include "mvx/encoders.hpp"
#include "mvx/error.hpp"
#include "oracles.hpp"

using mvx::Tensor;

namespace {

mvx::PointMlp<Tensor> random_mlp(std::size_t in, std::size_t hidden, std::size_t out, mvx::Rng& rng) {
  return {oracle::random_tensor({in, hidden}, rng, 0.7), oracle::random_tensor({hidden}, rng, 0.2),
          oracle::random_tensor({hidden, out}, rng, 0.7), oracle::random_tensor({out}, rng, 0.2)};
}

}  // namespace

TEST(PatchEncode, ConstantImageGivesIdenticalTokens) {
  const auto img = mvx::Image::filled(21, 28, 3, 0.5);
  const Tensor proj = Tensor::full({3, 1}, 1.0);
  const auto grid = mvx::patch_encode(img, 7, proj);
  ASSERT_EQ(grid.values.shape(), (mvx::Shape{1, 49, 1}));
  for (double v : grid.values.data()) EXPECT_DOUBLE_EQ(v, 1.5);
}

TEST(PatchEncode, SevenGridHas49Tokens) {
  mvx::Rng rng(1);
  const mvx::Image img(oracle::uniform_tensor({30, 33, 3}, rng));
  EXPECT_EQ(mvx::patch_encode(img, 7, oracle::random_tensor({3, 16}, rng)).tokens(), 49u);
}

TEST(PatchEncode, IdentityProjectionEqualsCellMeans) {
  mvx::Rng rng(2);
  const Tensor pixels = oracle::uniform_tensor({14, 14, 3}, rng);
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at({i, i}) = 1.0;
  const auto grid = mvx::patch_encode(mvx::Image(pixels), 7, eye);
  const Tensor want = oracle::patch_pool(pixels, 7);
  EXPECT_LT(mvx::max_abs_diff(grid.values.reshape({49, 3}), want), 1e-15);
  // Each token is the mean of its 2x2 cell.
  const double cell = (pixels.at({2, 4, 1}) + pixels.at({2, 5, 1}) + pixels.at({3, 4, 1}) + pixels.at({3, 5, 1})) / 4;
  EXPECT_NEAR(grid.values.at({0, 1 * 7 + 2, 1}), cell, 1e-15);
}

TEST(PatchEncode, UnevenImageMatchesPoolingOracle) {
  mvx::Rng rng(3);
  const Tensor pixels = oracle::uniform_tensor({23, 17, 1}, rng);
  const Tensor proj = oracle::random_tensor({1, 5}, rng);
  const auto grid = mvx::patch_encode(mvx::Image(pixels), 7, proj);
  EXPECT_LT(mvx::max_abs_diff(grid.values.reshape({49, 5}), oracle::matmul(oracle::patch_pool(pixels, 7), proj)),
            1e-12);
}

TEST(PatchEncode, RejectsSmallImage) {
  EXPECT_THROW(mvx::patch_encode(mvx::Image::filled(6, 10, 3, 0.1), 7, Tensor({3, 4})), mvx::InputError);
}

TEST(Image, RejectsOutOfRangeValues) {
  EXPECT_THROW(mvx::Image(Tensor::full({7, 7, 3}, 1.5)), mvx::InputError);
  EXPECT_THROW(mvx::Image(Tensor::full({7, 7, 2}, 0.5)), mvx::InputError);
}

TEST(PointCloud, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(mvx::PointCloud(Tensor({0, 3})), mvx::InputError);
  Tensor bad({1, 3});
  bad.at({0, 1}) = std::nan("");
  EXPECT_THROW(mvx::PointCloud{bad}, mvx::InputError);
}

TEST(Fps, TwoPointsBothSelected) {
  const Tensor pts({2, 3}, {0, 0, 0, 1, 1, 1});
  const auto idx = mvx::farthest_point_sample(pts, 2);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1}));
}

TEST(Fps, SingleSampleIsStart) {
  mvx::Rng rng(4);
  EXPECT_EQ(mvx::farthest_point_sample(oracle::random_tensor({9, 3}, rng), 1, 5), (std::vector<std::size_t>{5}));
}

TEST(Fps, MatchesExhaustiveGreedy) {
  mvx::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor pts = oracle::random_tensor({16, 3}, rng);
    const std::size_t start = rng.below(16);
    EXPECT_EQ(mvx::farthest_point_sample(pts, 5, start), oracle::fps(pts, 5, start));
  }
}

TEST(Fps, DuplicatePointsNeverReselected) {
  const Tensor pts({4, 3}, {0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0});
  const auto idx = mvx::farthest_point_sample(pts, 4);
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 4u);
  EXPECT_EQ(idx, oracle::fps(pts, 4, 0));
}

TEST(Fps, RejectsTooManySamples) {
  EXPECT_THROW(mvx::farthest_point_sample(Tensor({3, 3}), 4), mvx::InputError);
}

TEST(SetAbstraction, KOneAppliesMlpToZeroOffset) {
  mvx::Rng rng(6);
  const Tensor pts = oracle::random_tensor({5, 3}, rng), feats = oracle::random_tensor({5, 2}, rng);
  const auto mlp = random_mlp(5, 4, 3, rng);
  const auto r = mvx::set_abstraction(pts, feats, {2}, 1, mlp);
  Tensor in({1, 5});
  in.at({0, 3}) = feats.at({2, 0});
  in.at({0, 4}) = feats.at({2, 1});
  auto relu = [](Tensor t) {
    for (auto& x : t.mutable_data()) x = std::max(0.0, x);
    return t;
  };
  const Tensor want = relu(oracle::linear(relu(oracle::linear(in, mlp.w1, mlp.b1)), mlp.w2, mlp.b2));
  EXPECT_LT(mvx::max_abs_diff(r.feats, want), 1e-12);
  EXPECT_EQ(r.points.at({0, 0}), pts.at({2, 0}));
}

TEST(SetAbstraction, MatchesScalarOracle) {
  mvx::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor pts = oracle::random_tensor({8, 3}, rng), feats = oracle::random_tensor({8, 2}, rng);
    const auto mlp = random_mlp(5, 6, 4, rng);
    const auto centroids = oracle::fps(pts, 3, 0);
    const auto r = mvx::set_abstraction(pts, feats, centroids, 3, mlp);
    EXPECT_LT(mvx::max_abs_diff(r.feats, oracle::set_abstraction(pts, feats, centroids, 3, mlp)), 1e-10);
  }
}

TEST(SetAbstraction, RejectsOversizedNeighbourhood) {
  mvx::Rng rng(8);
  const auto mlp = random_mlp(3, 2, 2, rng);
  EXPECT_THROW(mvx::set_abstraction(Tensor({2, 3}), Tensor{}, {0}, 3, mlp), mvx::InputError);
}

TEST(Knn, BreaksTiesByLowestIndex) {
  const Tensor pts({4, 3}, {0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0});
  EXPECT_EQ(mvx::knn(pts, 0, 3), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(EncodeLidar, OutputsModelWidth) {
  mvx::Rng rng(9);
  const mvx::LidarConfig cfg;
  const auto w = mvx::init_lidar_weights<double>(cfg, 1);
  const auto out = mvx::encode_lidar<double>(mvx::PointCloud(oracle::random_tensor({200, 3}, rng, 10.0)), w, cfg);
  EXPECT_EQ(out.shape(), (mvx::Shape{512}));
}

TEST(EncodeLidar, InvariantToPointOrder) {
  mvx::Rng rng(10);
  const mvx::LidarConfig cfg{16, 4, 4, 8, 8, 12};
  const auto w = mvx::init_lidar_weights<double>(cfg, 3);
  const Tensor pts = oracle::random_tensor({40, 3}, rng, 5.0);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Tensor shuffled({40, 3});
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t c = 0; c < 3; ++c) shuffled.at({i, c}) = pts.at({perm[i], c});
  const auto a = mvx::encode_lidar<double>(mvx::PointCloud(pts), w, cfg);
  const auto b = mvx::encode_lidar<double>(mvx::PointCloud(shuffled), w, cfg);
  EXPECT_LT(mvx::max_abs_diff(a, b), 1e-10);
}

TEST(EncodeLidar, SinglePointMatchesHandTrace) {
  mvx::Rng rng(11);
  const mvx::LidarConfig cfg{64, 16, 8, 3, 2, 4};
  mvx::LidarWeights<Tensor> w;
  w.level1 = random_mlp(4, 3, 3, rng);
  w.level2 = random_mlp(6, 2, 2, rng);
  w.proj_w = oracle::random_tensor({2, 4}, rng);
  w.proj_b = oracle::random_tensor({4}, rng);
  const auto out = mvx::encode_lidar<double>(mvx::PointCloud(Tensor({1, 3}, {2.0, -1.0, 0.5})), w, cfg);
  // Level 1: zero offset, zero intensity.
  double h1[3], f1[3], h2[2], f2[2];
  for (int j = 0; j < 3; ++j) h1[j] = std::max(0.0, w.level1.b1.data()[j]);
  for (int j = 0; j < 3; ++j) {
    double s = w.level1.b2.data()[j];
    for (int i = 0; i < 3; ++i) s += h1[i] * w.level1.w2.at({std::size_t(i), std::size_t(j)});
    f1[j] = std::max(0.0, s);
  }
  // Level 2: zero offset followed by the level-1 feature.
  for (int j = 0; j < 2; ++j) {
    double s = w.level2.b1.data()[j];
    for (int i = 0; i < 3; ++i) s += f1[i] * w.level2.w1.at({std::size_t(3 + i), std::size_t(j)});
    h2[j] = std::max(0.0, s);
  }
  for (int j = 0; j < 2; ++j) {
    double s = w.level2.b2.data()[j];
    for (int i = 0; i < 2; ++i) s += h2[i] * w.level2.w2.at({std::size_t(i), std::size_t(j)});
    f2[j] = std::max(0.0, s);
  }
  for (std::size_t o = 0; o < 4; ++o) {
    const double want = w.proj_b.data()[o] + f2[0] * w.proj_w.at({0, o}) + f2[1] * w.proj_w.at({1, o});
    EXPECT_NEAR(out.data()[o], want, 1e-12);
  }
}

TEST(EncodeImage, GrayscaleIsReplicatedAcrossChannels) {
  mvx::Rng rng(12);
  const Tensor gray = oracle::uniform_tensor({14, 14, 1}, rng);
  Tensor rgb({14, 14, 3});
  for (std::size_t y = 0; y < 14; ++y)
    for (std::size_t x = 0; x < 14; ++x)
      for (std::size_t c = 0; c < 3; ++c) rgb.at({y, x, c}) = gray.at({y, x, 0});
  const Tensor proj = mvx::init_patch_projection<double>(8, 1);
  const auto a = mvx::encode_image<double>(mvx::Image(gray), mvx::Modality::Depth, mvx::View::Left, 7, proj);
  const auto b = mvx::encode_image<double>(mvx::Image(rgb), mvx::Modality::Rgb, mvx::View::Left, 7, proj);
  EXPECT_TRUE(a.values.identical(b.values));
  EXPECT_EQ(a.modality, mvx::Modality::Depth);
  EXPECT_EQ(a.view, mvx::View::Left);
}
