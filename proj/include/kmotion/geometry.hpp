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

// Pinhole camera and rigid-motion primitives.
//
// Convention: a RigidTransform maps a point expressed in the target camera
// frame into the source camera frame, x_src = R x_tgt + t. This is the
// direction inverse warping needs: target pixel -> 3D -> source pixel.

#include <array>
#include <cmath>
#include <span>
#include <string>

#include "kmotion/diff.hpp"
#include "kmotion/errors.hpp"

namespace kmotion {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
        !std::isfinite(cx) || !std::isfinite(cy)) {
      throw ContractError("intrinsics: focal lengths must be positive and finite");
    }
  }
};

template <class T>
struct Point3 {
  T x{}, y{}, z{};
};

template <class T>
struct PixelCoord {
  T u{}, v{};
};

template <class T>
using Mat3 = std::array<std::array<T, 3>, 3>;

template <class T>
struct RigidTransform {
  std::array<T, 3> axis_angle{};   // radians * unit axis
  std::array<T, 3> translation{};  // scene units

  static RigidTransform identity() { return {}; }
};

/// Points with z <= kMinDepth in front of the camera are treated as behind it.
inline constexpr double kMinDepth = 1e-6;

/// Below this angle Rodrigues coefficients switch to their Taylor series.
inline constexpr double kSmallAngle = 1e-4;

/// x = depth * K^-1 [u, v, 1].
template <class T>
Point3<T> backproject(const PixelCoord<double>& p, const T& depth,
                      const CameraIntrinsics& intr) {
  if (!(diff::value_of(depth) > 0.0)) {
    throw DomainError("backproject: depth must be positive");
  }
  const double rx = (p.u - intr.cx) / intr.fx;
  const double ry = (p.v - intr.cy) / intr.fy;
  return {depth * rx, depth * ry, depth};
}

template <class T>
struct Projection {
  PixelCoord<T> pixel{};
  bool in_front = false;
};

/// Perspective projection u = fx x/z + cx, v = fy y/z + cy. Points at or
/// behind the camera plane come back with in_front = false and a zero pixel.
template <class T>
Projection<T> project(const Point3<T>& x, const CameraIntrinsics& intr) {
  if (!(diff::value_of(x.z) > kMinDepth)) return {};
  return {{intr.fx * (x.x / x.z) + intr.cx, intr.fy * (x.y / x.z) + intr.cy}, true};
}

/// Rodrigues: R = I + A [w]x + B [w]x^2 with A = sin(t)/t, B = (1 - cos t)/t^2.
template <class T>
Mat3<T> rotation_of(const RigidTransform<T>& tf) {
  const T& wx = tf.axis_angle[0];
  const T& wy = tf.axis_angle[1];
  const T& wz = tf.axis_angle[2];
  const T theta2 = wx * wx + wy * wy + wz * wz;
  T a, b;
  if (diff::value_of(theta2) < kSmallAngle * kSmallAngle) {
    a = 1.0 - theta2 * (1.0 / 6.0);
    b = 0.5 - theta2 * (1.0 / 24.0);
  } else {
    const T theta = diff::sqrt(theta2);
    const T half_sin = diff::sin(0.5 * theta);
    a = diff::sin(theta) / theta;
    b = 2.0 * (half_sin * half_sin) / theta2;
  }
  // [w]x^2 = w w^T - theta^2 I
  const T xx = wx * wx, yy = wy * wy, zz = wz * wz;
  const T xy = wx * wy, xz = wx * wz, yz = wy * wz;
  Mat3<T> r;
  r[0][0] = 1.0 + b * (xx - theta2);
  r[1][1] = 1.0 + b * (yy - theta2);
  r[2][2] = 1.0 + b * (zz - theta2);
  r[0][1] = b * xy - a * wz;
  r[1][0] = b * xy + a * wz;
  r[0][2] = b * xz + a * wy;
  r[2][0] = b * xz - a * wy;
  r[1][2] = b * yz - a * wx;
  r[2][1] = b * yz + a * wx;
  return r;
}

/// R x + t with a precomputed rotation.
template <class T>
Point3<T> apply_rotation_translation(const Mat3<T>& r, const std::array<T, 3>& t,
                                     const Point3<T>& x) {
  const std::array<T, 4> p{x.x, x.y, x.z, T(1.0)};
  Point3<T> out;
  out.x = diff::dot(std::array<T, 4>{r[0][0], r[0][1], r[0][2], t[0]}, p);
  out.y = diff::dot(std::array<T, 4>{r[1][0], r[1][1], r[1][2], t[1]}, p);
  out.z = diff::dot(std::array<T, 4>{r[2][0], r[2][1], r[2][2], t[2]}, p);
  return out;
}

template <class T>
Point3<T> apply_transform(const RigidTransform<T>& tf, const Point3<T>& x) {
  return apply_rotation_translation(rotation_of(tf), tf.translation, x);
}

/// Network-style pose output: both halves are scaled by 0.01.
inline constexpr double kPoseScale = 0.01;

template <class T>
RigidTransform<T> decode_pose(std::span<const T> raw) {
  if (raw.size() != 6) throw ContractError("decode_pose: expected 6 values");
  RigidTransform<T> tf;
  for (int i = 0; i < 3; ++i) {
    tf.axis_angle[i] = kPoseScale * raw[i];
    tf.translation[i] = kPoseScale * raw[3 + i];
  }
  return tf;
}

template <class T>
RigidTransform<T> decode_pose(const std::array<T, 6>& raw) {
  return decode_pose<T>(std::span<const T>(raw));
}

/// Inverse of decode_pose for plain values.
inline std::array<double, 6> encode_pose(const RigidTransform<double>& tf) {
  std::array<double, 6> raw{};
  for (int i = 0; i < 3; ++i) {
    raw[i] = tf.axis_angle[i] / kPoseScale;
    raw[3 + i] = tf.translation[i] / kPoseScale;
  }
  return raw;
}

template <class T>
RigidTransform<double> value_of(const RigidTransform<T>& tf) {
  RigidTransform<double> out;
  for (int i = 0; i < 3; ++i) {
    out.axis_angle[i] = diff::value_of(tf.axis_angle[i]);
    out.translation[i] = diff::value_of(tf.translation[i]);
  }
  return out;
}

}  // namespace kmotion
