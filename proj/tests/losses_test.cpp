// Copyright 2026 The kmotion Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>
#include <kmotion/losses.hpp>
#include <kmotion/synth.hpp>

#include "test_util.hpp"

using namespace kmotion;

namespace {

WarpResult<double> all_valid(const Image<double>& img) {
  return {img, ValidityMask(img.width(), img.height(), 1, PixelState::Valid)};
}

DepthMap<double> random_depth(int w, int h, Rng& rng) {
  DepthMap<double> d(w, h, 1);
  for (double& v : d.data()) v = rng.uniform(1, 10);
  return d;
}

}  // namespace

TEST(Ssim, IdenticalImagesGiveOne) {
  Rng rng(1);
  const auto a = test::random_image(7, 5, 3, rng);
  const auto s = ssim_map(a, a);
  for (double v : s.data()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Ssim, ConstantBlackAgainstWhite) {
  const Image<double> a(4, 4, 1, 0.0), b(4, 4, 1, 1.0);
  const double expected = kSsimC1 / (1.0 + kSsimC1);
  const auto s = ssim_map(a, b);
  for (double v : s.data()) EXPECT_NEAR(v, expected, 1e-15);
  EXPECT_NEAR(expected, 9.999e-5, 1e-8);
}

TEST(Ssim, TinyNoiseStaysNearOne) {
  Rng rng(2);
  const auto a = test::random_image(16, 12, 3, rng, 0.1, 0.9);
  Image<double> b = a;
  std::normal_distribution<double> noise(0.0, 1e-4);
  std::mt19937_64 gen(3);
  for (double& v : b.data()) v += noise(gen);
  const auto s = ssim_map(a, b);
  for (double v : s.data()) EXPECT_GT(v, 0.99);
}

TEST(Ssim, SymmetricAndBoundedProperty) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = test::random_image(6, 5, 1 + 2 * (trial % 2), rng, 0, 1);
    const auto b = test::random_image(6, 5, a.channels(), rng, 0, 1);
    const auto ab = ssim_map(a, b), ba = ssim_map(b, a);
    ASSERT_EQ(ab.data(), ba.data());
    for (double v : ab.data()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Ssim, ShapeMismatch) {
  EXPECT_THROW(ssim_map(Image<double>(3, 3, 1), Image<double>(3, 4, 1)), ContractError);
}

TEST(Photometric, PerfectWarpIsZero) {
  Rng rng(5);
  const auto t = test::random_image(6, 5, 3, rng);
  const auto r = photometric_loss(t, {all_valid(t)}, 0.85);
  for (double v : r.loss.data()) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_EQ(count_valid(r.validity), t.pixel_count());
}

TEST(Photometric, MinimumSelectsPerfectSource) {
  Rng rng(6);
  const auto t = test::random_image(6, 5, 3, rng);
  const auto other = test::random_image(6, 5, 3, rng);
  const auto r = photometric_loss(t, {all_valid(other), all_valid(t)}, 0.85);
  for (double v : r.loss.data()) EXPECT_NEAR(v, 0.0, 1e-12);
  for (int s : r.chosen_source.data()) EXPECT_EQ(s, 1);
}

TEST(Photometric, PureL1Branch) {
  const Image<double> t(5, 4, 3, 0.2), w(5, 4, 3, 0.7);
  const auto r = photometric_loss(t, {all_valid(w)}, 0.0);
  for (double v : r.loss.data()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(Photometric, EmptySourceList) {
  EXPECT_THROW(photometric_loss(Image<double>(2, 2, 1), std::vector<WarpResult<double>>{}, 0.85),
               ContractError);
}

TEST(Photometric, InvalidPixelsAreExcluded) {
  Rng rng(7);
  const auto t = test::random_image(6, 5, 1, rng);
  auto a = all_valid(test::random_image(6, 5, 1, rng));
  auto b = all_valid(test::random_image(6, 5, 1, rng));
  a.validity(2, 2) = PixelState::OutOfView;
  b.validity(2, 2) = PixelState::BehindCamera;
  b.validity(4, 1) = PixelState::OutOfView;
  const auto r = photometric_loss(t, {a, b}, 0.85);
  EXPECT_EQ(r.validity(2, 2), PixelState::OutOfView);
  EXPECT_EQ(r.chosen_source(2, 2), -1);
  EXPECT_EQ(r.loss(2, 2), 0.0);
  EXPECT_EQ(r.chosen_source(4, 1), 0);
  EXPECT_EQ(count_valid(r.validity), t.pixel_count() - 1);
}

TEST(Photometric, InvalidPixelsCarryNoGradient) {
  // A pixel whose only source sample is invalid contributes nothing to the
  // gradient of the summed loss with respect to that sample.
  Rng rng(8);
  const auto t = test::random_image(5, 5, 1, rng);
  const auto w0 = test::random_image(5, 5, 1, rng);
  std::vector<double> x(w0.data());
  auto f = [&](auto v) {
    using T = std::remove_cvref_t<decltype(v[0])>;
    WarpResult<T> wr{Image<T>(5, 5, 1), ValidityMask(5, 5, 1, PixelState::Valid)};
    for (std::size_t i = 0; i < x.size(); ++i) wr.image.data()[i] = v[i];
    wr.validity(2, 2) = PixelState::OutOfView;
    const auto r = photometric_loss(lift<T>(t), {wr}, 0.85);
    return diff::sum(std::span<const T>(r.loss.data()));
  };
  const auto rec = diff::forward(f, x);
  const auto g = diff::backward(rec);
  EXPECT_EQ(g[t.index(2, 2)], 0.0);
  EXPECT_NE(g[t.index(1, 2)], 0.0);
}

TEST(Photometric, NonNegativeAndZeroOnlyWhenEqualProperty) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = test::random_image(6, 5, 3, rng);
    auto w = t;
    const std::size_t i = rng.below(w.size());
    w.data()[i] = std::clamp(w.data()[i] + 0.1, 0.0, 1.0);
    const auto r = photometric_loss(t, {all_valid(w)}, 0.85);
    double total = 0.0;
    for (double v : r.loss.data()) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_GT(total, 0.0);
  }
}

TEST(Photometric, ExtraSourceNeverIncreasesLossProperty) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = test::random_image(6, 5, 3, rng);
    auto a = all_valid(test::random_image(6, 5, 3, rng));
    auto b = all_valid(test::random_image(6, 5, 3, rng));
    for (auto& s : b.validity.data()) s = rng.uniform() < 0.3 ? PixelState::OutOfView : s;
    const auto one = photometric_loss(t, {a}, 0.85);
    const auto two = photometric_loss(t, {a, b}, 0.85);
    for (std::size_t i = 0; i < one.loss.size(); ++i) EXPECT_LE(two.loss.data()[i], one.loss.data()[i]);
  }
}

TEST(Photometric, AutoMaskExcludesStaticPixels) {
  Rng rng(11);
  const auto t = test::random_image(6, 5, 1, rng);
  auto unwarped = test::random_image(6, 5, 1, rng);
  unwarped(3, 3) = t(3, 3);
  auto warped = unwarped;
  warped(3, 3) = std::clamp(t(3, 3) + 0.3, 0.0, 1.0);
  const std::vector<Image<double>> raw{unwarped};
  const auto r = photometric_loss(t, {all_valid(warped)}, 0.0, &raw);
  EXPECT_EQ(r.validity(3, 3), PixelState::OutOfView);
  const auto off = photometric_loss(t, {all_valid(warped)}, 0.0);
  EXPECT_EQ(off.validity(3, 3), PixelState::Valid);
}

TEST(Smoothness, ConstantDepthIsZero) {
  Rng rng(12);
  const auto img = test::random_image(6, 5, 3, rng);
  EXPECT_EQ(smoothness_loss(DepthMap<double>(6, 5, 1, 3.7), img), 0.0);
}

TEST(Smoothness, StepEdgeRatio) {
  DepthMap<double> depth(2, 1, 1);
  depth(0, 0) = 1.0;
  depth(1, 0) = 2.0;
  Image<double> edge(2, 1, 1), flat(2, 1, 1, 0.5);
  edge(0, 0) = 0.0;
  edge(1, 0) = 1.0;
  const double a = smoothness_loss(depth, edge), b = smoothness_loss(depth, flat);
  // d* = (4/3, 2/3): one horizontal difference of 2/3 over two pixels.
  EXPECT_NEAR(b, (2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_NEAR(a / b, std::exp(-1.0), 1e-15);
}

TEST(Smoothness, ScaleInvarianceProperty) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto img = test::random_image(7, 6, 3, rng);
    const auto d = random_depth(7, 6, rng);
    const double c = std::exp(rng.uniform(-5, 5));
    DepthMap<double> scaled = d;
    for (double& v : scaled.data()) v *= c;
    EXPECT_NEAR(smoothness_loss(scaled, img), smoothness_loss(d, img), 1e-10);
  }
}

TEST(MaskSmoothness, ConstantAndSingleComponentAreZero) {
  Rng rng(14);
  const auto img = test::random_image(6, 5, 3, rng);
  MaskStack<double> m(6, 5, 3);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) {
      m(x, y, 0) = 0.2;
      m(x, y, 1) = 0.3;
      m(x, y, 2) = 0.5;
    }
  }
  EXPECT_EQ(mask_smoothness_loss(m, img), 0.0);
  EXPECT_EQ(mask_smoothness_loss(MaskStack<double>(6, 5, 1, 1.0), img), 0.0);
}

TEST(MaskSmoothness, HalfSplitOnFlatImage) {
  MaskStack<double> m(4, 1, 2, 0.0);
  for (int x = 0; x < 4; ++x) (x < 2 ? m(x, 0, 0) : m(x, 0, 1)) = 1.0;
  EXPECT_NEAR(mask_smoothness_loss(m, Image<double>(4, 1, 1, 0.3)), 0.5, 1e-15);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.lambda_for(1.0), 0.001);
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.lambda_base = 0.0;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.scales = {0.3};
  EXPECT_THROW(c.validate(), ContractError);
  c.scales = {};
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(TotalLoss, GroundTruthOnStaticIdentityScene) {
  // With zero motion every sample lands on a pixel center, so the photometric
  // term vanishes up to rounding.
  auto cfg = random_scene_config(3, 0);
  cfg.ego_prev = cfg.ego_next = RigidTransform<double>::identity();
  const auto scene = generate_scene(cfg);
  const Prediction<double> gt{scene.depth, scene.masks, scene.transforms};
  const LossConfig lc;
  const auto ev = total_loss(scene.observation(), gt, lc);
  EXPECT_LT(ev.breakdown.photometric, 1e-6);
  const double smooth = smoothness_loss(scene.depth, scene.target);
  EXPECT_NEAR(ev.breakdown.total, 0.001 * smooth, 1e-6);
}

TEST(TotalLoss, GroundTruthOnMovingSceneIsSmall) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto scene = generate_scene(random_scene_config(seed));
    const Prediction<double> gt{scene.depth, scene.masks, scene.transforms};
    const BoolMap clean = scene.clean_region();
    const auto ev = total_loss(scene.observation(), gt, LossConfig{}, &clean);
    // Bilinear resampling of the texture leaves a small residual.
    EXPECT_LT(ev.breakdown.photometric, 2e-3) << "seed " << seed;
  }
}

TEST(TotalLoss, PerfectWarpWithoutSmoothnessIsZero) {
  Rng rng(15);
  const auto img = test::random_image(8, 6, 3, rng);
  const Observation obs{img, {img}, CameraIntrinsics{8, 8, 3.5, 2.5}};
  const Prediction<double> pred{DepthMap<double>(8, 6, 1, 4.0), MaskStack<double>(8, 6, 1, 1.0),
                                {TransformSet<double>(1)}};
  LossConfig lc;
  lc.lambda_base = 1e-300;  // the smallest positive weight; constant depth gives zero anyway
  const auto ev = total_loss(obs, pred, lc);
  EXPECT_NEAR(ev.breakdown.total, 0.0, 1e-12);
}

TEST(TotalLoss, RecomposesExactlyProperty) {
  Rng rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    const auto scene = generate_scene(random_scene_config(100 + trial));
    const int w = scene.depth.width(), h = scene.depth.height(), k = scene.component_count();
    DepthMap<double> depth = scene.depth;
    for (double& d : depth.data()) d *= rng.uniform(0.8, 1.2);
    MaskLogits<double> logits(w, h, k);
    for (double& l : logits.data()) l = rng.uniform(-2, 2);
    LossConfig lc = trial % 2 ? LossConfig::mask_smoothing_baseline() : LossConfig{};
    if (trial % 3 == 0) lc.scales = {1.0, 0.5, 0.25, 0.125};
    const Prediction<double> pred{depth, normalize_masks(logits, OrderingWeights::ordered(k)),
                                  scene.transforms};
    const auto b = total_loss(scene.observation(), pred, lc).breakdown;
    EXPECT_EQ(b.total, b.photometric + b.lambda * b.smoothness + b.mask_weight * b.mask_smoothness);
    EXPECT_GT(b.valid_pixel_count, 0);
    if (!lc.mask_smoothing) EXPECT_EQ(b.mask_smoothness, 0.0);
  }
}

TEST(TotalLoss, MultiScaleSumsDownsampledTerms) {
  Rng rng(17);
  const auto img = test::random_image(16, 12, 3, rng);
  const auto depth = random_depth(16, 12, rng);
  const Observation obs{img, {img}, CameraIntrinsics{16, 16, 7.5, 5.5}};
  const Prediction<double> pred{depth, MaskStack<double>(16, 12, 1, 1.0), {TransformSet<double>(1)}};
  LossConfig lc;
  lc.scales = {1.0, 0.5, 0.25};
  const auto b = total_loss(obs, pred, lc).breakdown;
  const auto d2 = downsample2(depth), d4 = downsample2(d2);
  const auto i2 = downsample2(img), i4 = downsample2(i2);
  const double expected = smoothness_loss(depth, img) + 0.5 * smoothness_loss(d2, i2) +
                          0.25 * smoothness_loss(d4, i4);
  EXPECT_NEAR(b.smoothness, expected, 1e-14);
}

TEST(TotalLoss, NoValidPixels) {
  const Image<double> img(4, 3, 1, 0.5);
  const Observation obs{img, {img}, CameraIntrinsics{2, 2, 1.5, 1}};
  const Prediction<double> pred{DepthMap<double>(4, 3, 1, 1.0), MaskStack<double>(4, 3, 1, 1.0),
                                {TransformSet<double>{{{0, 0, 0}, {0, 0, -5}}}}};
  EXPECT_THROW(total_loss(obs, pred, LossConfig{}), DegenerateInputError);
}

TEST(TotalLoss, GradientMatchesFiniteDifferencesProperty) {
  Rng rng(18);
  const int w = 8, h = 6, k = 2;
  Image<double> img(w, h, 1), src(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img(x, y) = 0.5 + 0.3 * std::sin(0.8 * x) * std::cos(0.6 * y + 0.2);
      src(x, y) = 0.5 + 0.3 * std::sin(0.8 * x + 0.3) * std::cos(0.6 * y + 0.1);
    }
  }
  const Observation obs{img, {src}, CameraIntrinsics{8, 8, 3.5, 2.5}};
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<double> x;
    for (std::size_t i = 0; i < n; ++i) x.push_back(std::log(rng.uniform(3, 5)));
    for (std::size_t i = 0; i < n * k; ++i) x.push_back(rng.uniform(-1, 1));
    for (int i = 0; i < 6 * k; ++i) x.push_back(rng.uniform(-3, 3));
    LossConfig lc = trial % 2 ? LossConfig::mask_smoothing_baseline() : LossConfig{};
    lc.scales = {1.0, 0.5};
    auto f = [&](auto v) {
      using T = std::remove_cvref_t<decltype(v[0])>;
      Prediction<T> p{DepthMap<T>(w, h, 1), {}, {TransformSet<T>{}}};
      for (std::size_t i = 0; i < n; ++i) p.depth.data()[i] = diff::exp(v[i]);
      MaskLogits<T> logits(w, h, k);
      for (std::size_t i = 0; i < n * k; ++i) logits.data()[i] = v[n + i];
      p.masks = normalize_masks(logits, lc.use_depth_ordering ? OrderingWeights::ordered(k)
                                                              : OrderingWeights::flat(k));
      for (int c = 0; c < k; ++c) p.poses[0].push_back(decode_pose(v.subspan(n + n * k + 6 * c, 6)));
      return total_loss(obs, p, lc).total;
    };
    std::vector<std::size_t> coords;
    for (int i = 0; i < 6; ++i) coords.push_back(rng.below(x.size()));
    const auto r = diff::grad_check(f, x, 1e-6, coords);
    EXPECT_LT(r.max_relative_error, 1e-3) << "coordinate " << r.worst_coordinate;
  }
}
