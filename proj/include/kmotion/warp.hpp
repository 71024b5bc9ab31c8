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

// Inverse warping of a source view into the target frame.
//
// For each target pixel p: backproject with its depth, move the point with
// the mask-blended rigid motions, project into the source camera and sample
// the source image bilinearly. Samples that land outside [0, w-1] x [0, h-1]
// or behind the camera are flagged in the validity mask and carry no
// gradient.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "kmotion/decomposition.hpp"
#include "kmotion/diff.hpp"
#include "kmotion/geometry.hpp"
#include "kmotion/image.hpp"

namespace kmotion {

enum class PixelState : std::uint8_t { Valid = 0, OutOfView = 1, BehindCamera = 2 };

using ValidityMask = Raster<PixelState>;

inline constexpr int kMaxChannels = 3;

template <class T>
struct Sample {
  std::array<T, kMaxChannels> color{};
  bool valid = false;
};

namespace detail {

struct BilinearCell {
  int x0, y0, x1, y1;
  double fx, fy;
};

inline bool locate(const Image<double>& img, double u, double v, BilinearCell& cell) {
  const double umax = img.width() - 1;
  const double vmax = img.height() - 1;
  if (!(u >= 0.0 && u <= umax && v >= 0.0 && v <= vmax)) return false;
  cell.x0 = std::min(static_cast<int>(std::floor(u)), std::max(img.width() - 2, 0));
  cell.y0 = std::min(static_cast<int>(std::floor(v)), std::max(img.height() - 2, 0));
  cell.x1 = std::min(cell.x0 + 1, img.width() - 1);
  cell.y1 = std::min(cell.y0 + 1, img.height() - 1);
  cell.fx = u - cell.x0;
  cell.fy = v - cell.y0;
  return true;
}

}  // namespace detail

/// Bilinear interpolation of the four pixels around q.
template <class T>
Sample<T> bilinear_sample(const Image<double>& img, const PixelCoord<T>& q) {
  Sample<T> s;
  detail::BilinearCell c{};
  if (!detail::locate(img, diff::value_of(q.u), diff::value_of(q.v), c)) return s;
  s.valid = true;
  const double gx = 1.0 - c.fx;
  const double gy = 1.0 - c.fy;
  for (int ch = 0; ch < img.channels(); ++ch) {
    const double i00 = img(c.x0, c.y0, ch), i10 = img(c.x1, c.y0, ch);
    const double i01 = img(c.x0, c.y1, ch), i11 = img(c.x1, c.y1, ch);
    const double top = gx * i00 + c.fx * i10;
    const double bottom = gx * i01 + c.fx * i11;
    const double value = gy * top + c.fy * bottom;
    if constexpr (std::is_same_v<T, double>) {
      s.color[ch] = value;
    } else {
      const double du = gy * (i10 - i00) + c.fy * (i11 - i01);
      const double dv = bottom - top;
      if (q.u.is_constant() && q.v.is_constant()) {
        s.color[ch] = T(value);
      } else {
        s.color[ch] = diff::detail::tape_or_throw().record<2>(diff::Op::Sample, value,
                                                              {q.u, q.v}, {du, dv});
      }
    }
  }
  return s;
}

template <class T>
struct WarpResult {
  Image<T> image;
  ValidityMask validity;
};

/// Where each target pixel lands in the source view.
template <class T>
struct WarpCoordinates {
  Raster<PixelCoord<T>> coords;
  ValidityMask in_front;  // Valid or BehindCamera only
};

template <class T>
void check_warp_inputs(const DepthMap<T>& depth, const MaskStack<T>& masks,
                       const TransformSet<T>& ts) {
  require_same_shape(depth, masks, "warp");
  if (depth.channels() != 1) throw ContractError("warp: depth must have one channel");
  if (static_cast<std::size_t>(masks.channels()) != ts.size()) {
    throw ContractError("warp: mask K does not match transform count");
  }
}

template <class T>
WarpCoordinates<T> warp_coordinates(const DepthMap<T>& depth, const MaskStack<T>& masks,
                                    const TransformSet<T>& ts,
                                    const CameraIntrinsics& intr) {
  check_warp_inputs(depth, masks, ts);
  intr.validate();
  const int w = depth.width(), h = depth.height();
  const int k = masks.channels();
  const RigidMotions<T> motions(ts);
  WarpCoordinates<T> out{Raster<PixelCoord<T>>(w, h, 1), ValidityMask(w, h, 1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Point3<T> pt = backproject(PixelCoord<double>{double(x), double(y)},
                                       depth(x, y), intr);
      const Point3<T> moved =
          blend_points(std::span<const T>(&masks(x, y, 0), static_cast<std::size_t>(k)),
                       motions, pt);
      const Projection<T> proj = project(moved, intr);
      out.coords(x, y) = proj.pixel;
      out.in_front(x, y) = proj.in_front ? PixelState::Valid : PixelState::BehindCamera;
    }
  }
  return out;
}

/// The source view resampled onto the target grid, with per-pixel validity.
template <class T>
WarpResult<T> synthesize_view(const DepthMap<T>& depth, const MaskStack<T>& masks,
                              const TransformSet<T>& ts, const Image<double>& src,
                              const CameraIntrinsics& intr) {
  require_same_shape(depth, src, "synthesize_view");
  if (src.channels() > kMaxChannels) throw ContractError("synthesize_view: too many channels");
  const WarpCoordinates<T> wc = warp_coordinates(depth, masks, ts, intr);
  const int w = depth.width(), h = depth.height(), nc = src.channels();
  WarpResult<T> out{Image<T>(w, h, nc), ValidityMask(w, h, 1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (wc.in_front(x, y) != PixelState::Valid) {
        out.validity(x, y) = PixelState::BehindCamera;
        continue;
      }
      const Sample<T> s = bilinear_sample(src, wc.coords(x, y));
      if (!s.valid) {
        out.validity(x, y) = PixelState::OutOfView;
        continue;
      }
      out.validity(x, y) = PixelState::Valid;
      for (int c = 0; c < nc; ++c) out.image(x, y, c) = s.color[c];
    }
  }
  return out;
}

inline std::size_t count_valid(const ValidityMask& m) {
  return static_cast<std::size_t>(
      std::count(m.data().begin(), m.data().end(), PixelState::Valid));
}

}  // namespace kmotion
