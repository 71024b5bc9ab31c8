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


#pragma once

// Fit outputs on disk: loss log lines, mask bundles, pose text, composite
// mask images.
//
//   depth.pfm     one-channel PFM
//   masks.pgm     K concatenated 8-bit P5 images, one per component
//   poses.txt     key-value: source.<s>.component.<c> = rx ry rz tx ty tz

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmotion/decomposition.hpp"
#include "kmotion/errors.hpp"
#include "kmotion/image.hpp"
#include "kmotion/io.hpp"
#include "kmotion/losses.hpp"
#include "kmotion/random.hpp"

namespace kmotion {

inline nlohmann::ordered_json to_json(const LossBreakdown& b) {
  nlohmann::ordered_json j;
  j["total"] = b.total;
  j["photometric"] = b.photometric;
  j["smoothness"] = b.smoothness;
  j["mask_smoothness"] = b.mask_smoothness;
  j["lambda"] = b.lambda;
  j["mask_weight"] = b.mask_weight;
  j["valid_pixel_count"] = b.valid_pixel_count;
  return j;
}

inline std::string loss_breakdown_json(const LossBreakdown& b, int step) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j.update(to_json(b));
  return j.dump();
}

inline void write_mask_bundle(const std::filesystem::path& path, const MaskStack<double>& masks) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (int c = 0; c < masks.channels(); ++c) {
    Image<double> ch(masks.width(), masks.height(), 1);
    for (std::size_t i = 0; i < ch.size(); ++i) ch.data()[i] = masks.data()[i * masks.channels() + c];
    io::write_pnm(out, ch);
  }
}

inline MaskStack<double> read_mask_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Image<double>> channels;
  Image<double> img;
  while (io::read_pnm(in, img)) {
    if (img.channels() != 1) throw IoError("mask bundle: expected grayscale images");
    if (!channels.empty() && !img.same_shape(channels.front())) {
      throw IoError("mask bundle: channel size mismatch");
    }
    channels.push_back(img);
  }
  if (channels.empty()) throw IoError("mask bundle: no images in " + path.string());
  const int k = static_cast<int>(channels.size());
  MaskStack<double> m(channels[0].width(), channels[0].height(), k);
  for (int c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < m.pixel_count(); ++i) m.data()[i * k + c] = channels[c].data()[i];
  }
  return m;
}

inline void write_poses(const std::filesystem::path& path,
                        const std::vector<TransformSet<double>>& poses) {
  io::KeyValues kv;
  for (std::size_t s = 0; s < poses.size(); ++s) {
    for (std::size_t c = 0; c < poses[s].size(); ++c) {
      const auto& tf = poses[s][c];
      std::string v;
      for (int i = 0; i < 3; ++i) v += (i ? " " : "") + io::format_double(tf.axis_angle[i]);
      for (int i = 0; i < 3; ++i) v += " " + io::format_double(tf.translation[i]);
      kv.set("source." + std::to_string(s) + ".component." + std::to_string(c), v);
    }
  }
  io::write_text(path, kv.serialize());
}

inline std::vector<TransformSet<double>> read_poses(const std::filesystem::path& path) {
  const io::KeyValues kv = io::KeyValues::load(path);
  std::vector<TransformSet<double>> out;
  for (int s = 0;; ++s) {
    TransformSet<double> ts;
    for (int c = 0;; ++c) {
      const std::string key = "source." + std::to_string(s) + ".component." + std::to_string(c);
      if (!kv.has(key)) break;
      const auto v = kv.numbers(key);
      if (v.size() != 6) throw ConfigError(path.string() + ": " + key + " expects 6 numbers");
      ts.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
    }
    if (ts.empty()) break;
    out.push_back(ts);
  }
  return out;
}

/// Mask composite: each component gets a fixed pseudo-random color and the
/// pixel color is the mask-weighted sum of those colors.
inline Image<double> mask_composite(const MaskStack<double>& masks, std::uint64_t seed = 7) {
  Rng rng(seed);
  std::vector<std::array<double, 3>> colors(static_cast<std::size_t>(masks.channels()));
  for (auto& col : colors) {
    for (double& x : col) x = rng.uniform(0.15, 1.0);
  }
  Image<double> out(masks.width(), masks.height(), 3, 0.0);
  for (int y = 0; y < masks.height(); ++y) {
    for (int x = 0; x < masks.width(); ++x) {
      for (int c = 0; c < masks.channels(); ++c) {
        for (int j = 0; j < 3; ++j) out(x, y, j) += masks(x, y, c) * colors[c][j];
      }
    }
  }
  return out;
}

inline void write_fit_artifacts(const std::filesystem::path& dir, const DepthMap<double>& depth,
                                const MaskStack<double>& masks,
                                const std::vector<TransformSet<double>>& poses) {
  std::filesystem::create_directories(dir);
  io::write_pfm(dir / "depth.pfm", depth);
  write_mask_bundle(dir / "masks.pgm", masks);
  write_poses(dir / "poses.txt", poses);
}

}  // namespace kmotion
