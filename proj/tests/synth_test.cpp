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

#include <filesystem>

using namespace kmotion;

namespace {

SceneConfig static_identity() {
  SceneConfig c;
  c.name = "still";
  return c;
}

}  // namespace

TEST(GenerateScene, StaticIdentityGivesIdenticalFrames) {
  const auto sc = generate_scene(static_identity());
  EXPECT_EQ(sc.prev.data(), sc.target.data());
  EXPECT_EQ(sc.next.data(), sc.target.data());
  EXPECT_EQ(sc.component_count(), 1);
  EXPECT_EQ(sc.masks.channels(), 1);
  for (double m : sc.masks.data()) EXPECT_EQ(m, 1.0);
  for (double d : sc.depth.data()) EXPECT_EQ(d, 10.0);
}

TEST(GenerateScene, ObjectMovingWithCameraIsFlaggedDegenerate) {
  auto c = static_identity();
  c.ego_next = {{0, 0, 0}, {0.2, 0, 0}};
  c.ego_prev = {{0, 0, 0}, {-0.2, 0, 0}};
  c.objects.push_back({"box", 20, 15, 36, 30, 5.0, c.ego_prev, c.ego_next});
  const auto sc = generate_scene(c);
  EXPECT_TRUE(sc.degenerate_motion());
  ASSERT_EQ(sc.degenerate_objects.size(), 1u);
  EXPECT_EQ(sc.degenerate_objects[0], "box");
  EXPECT_FALSE(generate_scene(random_scene_config(1)).degenerate_motion());
}

TEST(GenerateScene, MasksPartitionTheImageProperty) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sc = generate_scene(random_scene_config(seed));
    const int k = sc.component_count();
    for (std::size_t p = 0; p < sc.masks.pixel_count(); ++p) {
      int ones = 0;
      for (int c = 0; c < k; ++c) {
        const double m = sc.masks.data()[p * k + c];
        EXPECT_TRUE(m == 0.0 || m == 1.0);
        ones += m == 1.0;
      }
      EXPECT_EQ(ones, 1);
    }
    std::size_t moving = 0;
    for (auto v : sc.moving_region().data()) moving += v;
    EXPECT_GT(moving, 0u);
  }
}

TEST(GenerateScene, DeterministicProperty) {
  for (std::uint64_t seed : {1u, 7u, 42u}) {
    const auto a = generate_scene(random_scene_config(seed));
    const auto b = generate_scene(random_scene_config(seed));
    EXPECT_EQ(a.prev.data(), b.prev.data());
    EXPECT_EQ(a.target.data(), b.target.data());
    EXPECT_EQ(a.next.data(), b.next.data());
    EXPECT_EQ(a.depth.data(), b.depth.data());
    EXPECT_EQ(scene_checksum(a), scene_checksum(b));
  }
  EXPECT_NE(scene_checksum(generate_scene(random_scene_config(1))),
            scene_checksum(generate_scene(random_scene_config(2))));
}

TEST(GenerateScene, ValuesAreImagesAndTexturesAreSmooth) {
  const auto sc = generate_scene(random_scene_config(3));
  for (const auto* img : {&sc.prev, &sc.target, &sc.next}) {
    for (double v : img->data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  // Band-limited texture: neighbouring pixels almost never repeat exactly.
  std::size_t flat = 0, total = 0;
  for (int y = 0; y < sc.target.height(); ++y) {
    for (int x = 0; x + 1 < sc.target.width(); ++x) {
      flat += sc.target(x, y, 0) == sc.target(x + 1, y, 0);
      ++total;
    }
  }
  EXPECT_LT(static_cast<double>(flat) / total, 0.01);
}

TEST(GenerateScene, GroundTruthReproducesSourcesProperty) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sc = generate_scene(random_scene_config(seed));
    for (int s = 0; s < 2; ++s) {
      const Image<double>& src = s == 0 ? sc.prev : sc.next;
      const auto w = oracle_warp(sc.depth, sc.masks, sc.transforms[s], src, sc.config.intrinsics);
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t p = 0; p < sc.depth.pixel_count(); ++p) {
        if (sc.occluded[s].data()[p] || w.validity.data()[p] != PixelState::Valid) continue;
        for (int c = 0; c < src.channels(); ++c) {
          sum += std::abs(w.image.data()[p * src.channels() + c] -
                          sc.target.data()[p * src.channels() + c]);
        }
        n += src.channels();
      }
      ASSERT_GT(n, 0u);
      // Bilinear resampling of the rendered source against the exact render;
      // the loss-level bound below is the tighter statement.
      EXPECT_LT(sum / n, 2e-3) << "seed " << seed << " source " << s;
    }
  }
}

TEST(GenerateScene, GroundTruthLossIsSmallProperty) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sc = generate_scene(random_scene_config(seed));
    const BoolMap clean = sc.clean_region();
    const Prediction<double> gt{sc.depth, sc.masks, sc.transforms};
    const auto ev = total_loss(sc.observation(), gt, LossConfig{}, &clean);
    EXPECT_LT(ev.breakdown.photometric, 1e-3) << "seed " << seed;
  }
}

TEST(GenerateScene, FixtureFamiliesAreValid) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    EXPECT_NO_THROW(random_scene_config(seed).validate()) << seed;
    EXPECT_NO_THROW(static_scene_config(seed).validate()) << seed;
    EXPECT_NO_THROW(static_scene_config(seed, 4).validate()) << seed;
  }
}

TEST(SceneConfig, ObjectLeavingViewNamesObjectAndFrame) {
  auto c = static_identity();
  c.objects.push_back({"runner", 50, 10, 62, 20, 5.0, {}, {{0, 0, 0}, {1.0, 0, 0}}});
  try {
    generate_scene(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("runner"), std::string::npos) << msg;
    EXPECT_NE(msg.find("next"), std::string::npos) << msg;
  }
  c.objects[0].next = {};
  c.objects[0].prev = {{0, 0, 0}, {0, -2.0, 0}};
  try {
    generate_scene(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("prev"), std::string::npos) << e.what();
  }
}

TEST(SceneConfig, RejectsInvalidConfigurations) {
  auto behind = static_identity();
  behind.objects.push_back({"far", 10, 10, 20, 20, 12.0, {}, {}});
  EXPECT_THROW(behind.validate(), ConfigError);
  auto outside = static_identity();
  outside.objects.push_back({"wide", 10, 10, 70, 20, 5.0, {}, {}});
  EXPECT_THROW(outside.validate(), ConfigError);
  auto tilted = static_identity();
  tilted.background_slope = {0, 2.0};
  EXPECT_THROW(tilted.validate(), ConfigError);
  auto tiny = static_identity();
  tiny.width = 1;
  EXPECT_THROW(tiny.validate(), ConfigError);
  auto gray = static_identity();
  gray.channels = 2;
  EXPECT_THROW(gray.validate(), ConfigError);
}

TEST(SceneConfig, SerializationRoundTrip) {
  for (std::uint64_t seed : {1u, 5u}) {
    auto c = random_scene_config(seed);
    c.background_slope = {0.01, 0.02};
    const std::string text = serialize_scene_config(c);
    const auto back = scene_config_from(io::KeyValues::parse(text));
    EXPECT_EQ(serialize_scene_config(back), text);
    EXPECT_EQ(scene_checksum(generate_scene(back)), scene_checksum(generate_scene(c)));
  }
  EXPECT_THROW(scene_config_from(io::KeyValues::parse("fx = 1\nfy = 1\ncx = 0\ncy = 0\n"
                                                      "background_depth = 5\ntexture_style = wood\n")),
               ConfigError);
}

TEST(SceneConfig, CheckerStyleRenders) {
  auto c = random_scene_config(2);
  c.texture_style = TextureStyle::Checker;
  const auto sc = generate_scene(c);
  EXPECT_NE(scene_checksum(sc), scene_checksum(generate_scene(random_scene_config(2))));
}

TEST(ExportScene, WritesBundleWithManifest) {
  const auto dir = std::filesystem::temp_directory_path() / "kmotion_export_test";
  std::filesystem::remove_all(dir);
  const auto sc = generate_scene(random_scene_config(4));
  export_scene(sc, dir);
  for (const char* f : {"scene.cfg", "prev.pfm", "prev.ppm", "target.pfm", "target.ppm", "next.pfm",
                        "next.ppm", "depth.pfm", "manifest.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto manifest = io::KeyValues::load(dir / "manifest.txt");
  EXPECT_EQ(manifest.str("checksum"), io::hex64(scene_checksum(sc)));
  const auto depth = io::read_pfm(dir / "depth.pfm");
  for (std::size_t i = 0; i < depth.size(); ++i) {
    EXPECT_EQ(depth.data()[i], static_cast<double>(static_cast<float>(sc.depth.data()[i])));
  }
  const auto cfg = load_scene_config(dir / "scene.cfg");
  EXPECT_EQ(scene_checksum(generate_scene(cfg)), scene_checksum(sc));
  std::filesystem::remove_all(dir);
}

TEST(OracleWarp, IdentityLeavesSourceUnchanged) {
  const auto sc = generate_scene(random_scene_config(5));
  const TransformSet<double> ts(sc.component_count(), RigidTransform<double>::identity());
  const auto w = oracle_warp(sc.depth, sc.masks, ts, sc.prev, sc.config.intrinsics);
  for (int y = 1; y + 1 < sc.prev.height(); ++y) {
    for (int x = 1; x + 1 < sc.prev.width(); ++x) {
      ASSERT_EQ(w.validity(x, y), PixelState::Valid);
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(w.image(x, y, c), sc.prev(x, y, c), 1e-14);
    }
  }
}
