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

// Soft scene decomposition into K rigidly moving components.
//
// Each pixel carries K logits; normalize_masks turns them into a per-pixel
// distribution with order-weighted softmax, M_i = exp(d_i l_i) / sum_j exp(d_j l_j).
// The warped point of a pixel is the mask-weighted average of the K rigidly
// transformed copies of its 3D point. That average is not itself a rigid
// motion unless the mask is one-hot.

#include <algorithm>
#include <array>
#include <vector>

#include "kmotion/diff.hpp"
#include "kmotion/errors.hpp"
#include "kmotion/geometry.hpp"
#include "kmotion/image.hpp"

namespace kmotion {

/// Unnormalized per-pixel component scores; channel count is K.
template <class T = double>
using MaskLogits = Raster<T>;

/// Per-pixel component probabilities; channels sum to one at every pixel.
template <class T = double>
using MaskStack = Raster<T>;

template <class T = double>
using TransformSet = std::vector<RigidTransform<T>>;

/// Per-component logit multipliers d_i.
struct OrderingWeights {
  std::vector<double> d;

  /// d_i = i for i = 1..K: later components sharpen faster and dominate at
  /// zero logits.
  static OrderingWeights ordered(int k) {
    OrderingWeights w;
    for (int i = 1; i <= k; ++i) w.d.push_back(static_cast<double>(i));
    return w;
  }
  /// Plain softmax (all d_i = 1), used when depth ordering is disabled.
  static OrderingWeights flat(int k) {
    return OrderingWeights{std::vector<double>(static_cast<std::size_t>(k), 1.0)};
  }
  int k() const noexcept { return static_cast<int>(d.size()); }
};

template <class T>
MaskStack<T> normalize_masks(const MaskLogits<T>& logits, const OrderingWeights& w) {
  const int k = logits.channels();
  if (w.k() != k) throw ContractError("normalize_masks: ordering weights do not match K");
  for (double di : w.d) {
    if (!(di > 0.0)) throw ContractError("normalize_masks: ordering weights must be positive");
  }
  MaskStack<T> out(logits.width(), logits.height(), k);
  std::vector<T> e(static_cast<std::size_t>(k));
  for (int y = 0; y < logits.height(); ++y) {
    for (int x = 0; x < logits.width(); ++x) {
      if (k == 1) {
        out(x, y, 0) = T(1.0);
        continue;
      }
      // Shift by the (detached) max; softmax is invariant to it.
      double peak = w.d[0] * diff::value_of(logits(x, y, 0));
      for (int i = 1; i < k; ++i) {
        peak = std::max(peak, w.d[i] * diff::value_of(logits(x, y, i)));
      }
      for (int i = 0; i < k; ++i) e[i] = diff::exp(w.d[i] * logits(x, y, i) - peak);
      const T total = diff::sum(std::span<const T>(e));
      for (int i = 0; i < k; ++i) out(x, y, i) = e[i] / total;
    }
  }
  return out;
}

/// All-zero logits: under ordered weights every pixel starts at softmax(1..K).
inline MaskLogits<double> uniform_logits(int width, int height, int k) {
  if (k < 1) throw ContractError("uniform_logits: K must be at least 1");
  return MaskLogits<double>(width, height, k, 0.0);
}

/// Rotations of a transform set, computed once per set.
template <class T>
struct RigidMotions {
  std::vector<Mat3<T>> rotations;
  std::vector<std::array<T, 3>> translations;

  explicit RigidMotions(const TransformSet<T>& ts) {
    rotations.reserve(ts.size());
    for (const auto& tf : ts) {
      rotations.push_back(rotation_of(tf));
      translations.push_back(tf.translation);
    }
  }
  std::size_t size() const noexcept { return rotations.size(); }
};

/// sum_i weights[i] * (R_i x + t_i).
template <class T>
Point3<T> blend_points(std::span<const T> weights, const RigidMotions<T>& motions,
                       const Point3<T>& x) {
  const std::size_t k = motions.size();
  if (weights.size() != k) throw ContractError("blend: mask K does not match transform count");
  thread_local std::vector<T> xs, ys, zs;
  xs.resize(k);
  ys.resize(k);
  zs.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const Point3<T> moved =
        apply_rotation_translation(motions.rotations[i], motions.translations[i], x);
    xs[i] = moved.x;
    ys[i] = moved.y;
    zs[i] = moved.z;
  }
  return {diff::dot(weights, std::span<const T>(xs)),
          diff::dot(weights, std::span<const T>(ys)),
          diff::dot(weights, std::span<const T>(zs))};
}

/// x' = sum_i M_i(p) (R_i x + t_i) at integer pixel p.
template <class T>
Point3<T> blend_transform(const MaskStack<T>& masks, const TransformSet<T>& ts,
                          const PixelCoord<int>& p, const Point3<T>& x) {
  if (static_cast<std::size_t>(masks.channels()) != ts.size()) {
    throw ContractError("blend_transform: mask K does not match transform count");
  }
  if (p.u < 0 || p.v < 0 || p.u >= masks.width() || p.v >= masks.height()) {
    throw ContractError("blend_transform: pixel outside the mask");
  }
  const T* w = &masks(p.u, p.v, 0);
  return blend_points(std::span<const T>(w, ts.size()), RigidMotions<T>(ts), x);
}

}  // namespace kmotion
