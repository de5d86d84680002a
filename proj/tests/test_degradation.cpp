#include <gtest/gtest.h>

#include <cmath>

#include "mvx/degradation.hpp"
#include "mvx/error.hpp"
#include "oracles.hpp"

using mvx::DegradationKind;
using mvx::Tensor;

namespace {

mvx::Image random_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  mvx::Rng rng(seed);
  return mvx::Image(oracle::uniform_tensor({h, w, c}, rng));
}

// Horizontal box filter with clamped edges, straight from the definition.
Tensor blur_oracle(const Tensor& px, std::size_t k) {
  const long H = long(px.dim(0)), W = long(px.dim(1)), C = long(px.dim(2)), half = long(k / 2);
  Tensor out(px.shape());
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x)
      for (long c = 0; c < C; ++c) {
        double s = 0.0;
        for (long j = -half; j <= half; ++j) {
          const long src = std::clamp(x + j, 0L, W - 1);
          s += px.at({std::size_t(y), std::size_t(src), std::size_t(c)});
        }
        out.at({std::size_t(y), std::size_t(x), std::size_t(c)}) = std::clamp(s / double(k), 0.0, 1.0);
      }
  return out;
}

}  // namespace

TEST(Degradation, IdentityParametersAreExact) {
  const auto img = random_image(12, 16, 3, 1);
  EXPECT_TRUE(mvx::motion_blur(img, 1).pixels().identical(img.pixels()));
  EXPECT_TRUE(mvx::exposure(img, 1.0).pixels().identical(img.pixels()));
  EXPECT_TRUE(mvx::event_lowres(img, 1).pixels().identical(img.pixels()));
  mvx::Rng rng(2);
  const mvx::PointCloud cloud(oracle::random_tensor({50, 3}, rng, 10.0));
  EXPECT_TRUE(mvx::lidar_jitter(cloud, 0.0, 9).points().identical(cloud.points()));
}

TEST(MotionBlur, ConstantImageUnchanged) {
  const auto img = mvx::Image::filled(5, 9, 1, 0.3);
  EXPECT_LT(mvx::max_abs_diff(mvx::motion_blur(img, 5).pixels(), img.pixels()), 1e-15);
}

TEST(MotionBlur, BrightColumnSpreadsAThirdToNeighbours) {
  Tensor px({2, 5, 1});
  px.at({0, 2, 0}) = px.at({1, 2, 0}) = 1.0;
  const auto out = mvx::motion_blur(mvx::Image(px), 3).pixels();
  for (std::size_t y = 0; y < 2; ++y) {
    EXPECT_EQ(out.at({y, 0, 0}), 0.0);
    EXPECT_NEAR(out.at({y, 1, 0}), 1.0 / 3, 1e-15);
    EXPECT_NEAR(out.at({y, 2, 0}), 1.0 / 3, 1e-15);
    EXPECT_NEAR(out.at({y, 3, 0}), 1.0 / 3, 1e-15);
    EXPECT_EQ(out.at({y, 4, 0}), 0.0);
  }
}

TEST(MotionBlur, MatchesScalarOracleWithClampedEdges) {
  const auto img = random_image(6, 11, 3, 3);
  EXPECT_LT(mvx::max_abs_diff(mvx::motion_blur(img, 5).pixels(), blur_oracle(img.pixels(), 5)), 1e-14);
}

TEST(MotionBlur, RejectsEvenKernelAndOversizedKernel) {
  const auto img = random_image(4, 5, 1, 4);
  EXPECT_THROW(mvx::motion_blur(img, 4), mvx::ConfigError);
  EXPECT_THROW(mvx::motion_blur(img, 7), mvx::InputError);
}

TEST(Exposure, ScalesAndClamps) {
  const auto img = mvx::Image::filled(2, 2, 1, 0.5);
  const auto bright = mvx::exposure(img, 4.0);
  for (double v : bright.pixels().data()) EXPECT_EQ(v, 1.0);
  const auto dim = mvx::Image::filled(2, 2, 1, 0.8);
  const auto darker = mvx::exposure(dim, 0.25);
  for (double v : darker.pixels().data()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(EventLowRes, CheckerboardAveragesToHalf) {
  Tensor px({4, 4, 1});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) px.at({y, x, 0}) = double((x + y) % 2);
  const auto out = mvx::event_lowres(mvx::Image(px), 2).pixels();
  for (double v : out.data()) EXPECT_EQ(v, 0.5);
}

TEST(EventLowRes, BlocksAreUpsampledByNearestNeighbour) {
  const auto img = random_image(8, 12, 1, 5);
  const auto out = mvx::event_lowres(img, 4).pixels();
  for (std::size_t by = 0; by < 2; ++by)
    for (std::size_t bx = 0; bx < 3; ++bx) {
      double mean = 0.0;
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) mean += img.pixels().at({by * 4 + y, bx * 4 + x, 0});
      mean /= 16;
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(out.at({by * 4 + y, bx * 4 + x, 0}), mean, 1e-15);
    }
}

TEST(EventLowRes, ConstantImageUnchangedAndNonDividingFactorRejected) {
  const auto img = mvx::Image::filled(6, 6, 1, 0.4);
  EXPECT_LT(mvx::max_abs_diff(mvx::event_lowres(img, 3).pixels(), img.pixels()), 1e-15);
  EXPECT_THROW(mvx::event_lowres(img, 4), mvx::InputError);
}

TEST(ImageOperators, PreserveShapeAndRange) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto img = random_image(8, 8, 3, seed);
    for (const auto& out : {mvx::motion_blur(img, 3), mvx::exposure(img, 3.0), mvx::exposure(img, 0.3),
                            mvx::event_lowres(img, 2)}) {
      EXPECT_EQ(out.pixels().shape(), img.pixels().shape());
      for (double v : out.pixels().data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(LidarJitter, SameSeedIsBitIdenticalAndSeedsDiffer) {
  mvx::Rng rng(6);
  const mvx::PointCloud cloud(oracle::random_tensor({100, 3}, rng, 10.0));
  const auto a = mvx::lidar_jitter(cloud, 0.05, 42), b = mvx::lidar_jitter(cloud, 0.05, 42);
  EXPECT_TRUE(a.points().identical(b.points()));
  EXPECT_EQ(a.size(), cloud.size());
  EXPECT_FALSE(a.points().identical(mvx::lidar_jitter(cloud, 0.05, 43).points()));
}

TEST(LidarJitter, NoiseFollowsTheSeededGenerator) {
  const mvx::PointCloud cloud(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  const auto out = mvx::lidar_jitter(cloud, 0.5, 7);
  mvx::Rng rng(7);
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_EQ(out.points().data()[i], cloud.points().data()[i] + 0.5 * rng.normal());
}

TEST(LidarJitter, SampleStdMatchesSigma) {
  const std::size_t n = 100000;
  const mvx::PointCloud cloud(Tensor({n, 3}));
  const auto out = mvx::lidar_jitter(cloud, 0.1, 2024);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = out.points().at({i, axis});
      s += v;
      ss += v * v;
    }
    const double mean = s / n, sd = std::sqrt(ss / n - mean * mean);
    EXPECT_GE(sd, 0.095);
    EXPECT_LE(sd, 0.105);
  }
}

TEST(DegradationSpec, DefaultsAndValidation) {
  EXPECT_EQ(mvx::DegradationSpec::defaults(DegradationKind::MotionBlur).kernel, 9u);
  EXPECT_EQ(mvx::DegradationSpec::defaults(DegradationKind::Overexposure).gain, 3.0);
  EXPECT_EQ(mvx::DegradationSpec::defaults(DegradationKind::Underexposure).gain, 0.3);
  EXPECT_EQ(mvx::DegradationSpec::defaults(DegradationKind::LidarJitter).sigma, 0.05);
  EXPECT_EQ(mvx::DegradationSpec::defaults(DegradationKind::EventLowRes).factor, 4u);
  EXPECT_THROW(mvx::DegradationSpec::with_severity(DegradationKind::MotionBlur, 4, 0).validate(), mvx::ConfigError);
  EXPECT_THROW(mvx::DegradationSpec::with_severity(DegradationKind::Overexposure, 0.5, 0).validate(),
               mvx::ConfigError);
  EXPECT_THROW(mvx::DegradationSpec::with_severity(DegradationKind::Underexposure, 1.5, 0).validate(),
               mvx::ConfigError);
  EXPECT_THROW(mvx::DegradationSpec::with_severity(DegradationKind::LidarJitter, -0.1, 0).validate(),
               mvx::ConfigError);
  EXPECT_EQ(mvx::parse_degradation("el"), DegradationKind::EventLowRes);
  EXPECT_THROW(mvx::parse_degradation("fog"), mvx::ConfigError);
}

TEST(DegradationSpec, ApplyDispatchesByKind) {
  const auto img = random_image(8, 12, 1, 8);
  const auto spec = mvx::DegradationSpec::with_severity(DegradationKind::EventLowRes, 2, 0);
  EXPECT_TRUE(mvx::apply(img, spec).pixels().identical(mvx::event_lowres(img, 2).pixels()));
  EXPECT_THROW(mvx::apply(img, mvx::DegradationSpec::defaults(DegradationKind::LidarJitter)), mvx::ConfigError);
}
