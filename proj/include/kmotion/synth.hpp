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

// Procedural ground-truth scenes and a reference warp.
//
// A scene is a fronto-parallel textured background plane plus textured
// rectangular patches in front of it, all defined in the target camera frame.
// Every surface moves rigidly into each source frame (previous and next) with
// its own target-to-source transform. Source frames are rendered by exact ray
// casting against the moved surfaces, with the nearest surface winning, so a
// target pixel warped with the true depth and motion lands on exactly the
// texture point it shows.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kmotion/decomposition.hpp"
#include "kmotion/errors.hpp"
#include "kmotion/geometry.hpp"
#include "kmotion/image.hpp"
#include "kmotion/io.hpp"
#include "kmotion/losses.hpp"
#include "kmotion/random.hpp"
#include "kmotion/warp.hpp"

namespace kmotion {

enum class TextureStyle { SmoothNoise, Checker };

struct SceneObject {
  std::string name;
  // Target-frame pixel rectangle [u0, u1) x [v0, v1).
  int u0 = 0, v0 = 0, u1 = 0, v1 = 0;
  double depth = 1.0;
  RigidTransform<double> prev;  // target frame -> previous frame
  RigidTransform<double> next;  // target frame -> next frame
};

struct SceneConfig {
  std::string name = "scene";
  int width = 64;
  int height = 48;
  int channels = 3;
  CameraIntrinsics intrinsics{48.0, 48.0, 31.5, 23.5};
  double background_depth = 10.0;  // at the principal point
  /// Inverse-depth gradient of the background plane along normalized image
  /// x and y; zero gives a fronto-parallel plane.
  std::array<double, 2> background_slope{0.0, 0.0};
  std::vector<SceneObject> objects;
  RigidTransform<double> ego_prev;
  RigidTransform<double> ego_next;
  std::uint64_t texture_seed = 1;
  TextureStyle texture_style = TextureStyle::SmoothNoise;
  int texture_blur = 3;         // box radius; applied twice
  double texture_contrast = 0.2;

  /// Background depth seen through target pixel (u, v).
  double background_depth_at(double u, double v) const {
    return 1.0 / (background_slope[0] * (u - intrinsics.cx) / intrinsics.fx +
                  background_slope[1] * (v - intrinsics.cy) / intrinsics.fy + 1.0 / background_depth);
  }

  /// Validates the configuration invariants; throws ConfigError.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Texture

namespace detail {

inline void box_blur(Raster<double>& r, int radius) {
  if (radius <= 0) return;
  Raster<double> tmp(r.width(), r.height(), r.channels());
  const int w = r.width(), h = r.height();
  const double norm = 1.0 / (2 * radius + 1);
  for (int c = 0; c < r.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) acc += r(std::clamp(x + d, 0, w - 1), y, c);
        tmp(x, y, c) = acc * norm;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) acc += tmp(x, std::clamp(y + d, 0, h - 1), c);
        r(x, y, c) = acc * norm;
      }
    }
  }
}

inline double bspline_weight(double t, int i) {
  // Uniform cubic B-spline basis for offsets -1, 0, 1, 2.
  switch (i) {
    case 0: return (1 - t) * (1 - t) * (1 - t) / 6.0;
    case 1: return (3 * t * t * t - 6 * t * t + 4) / 6.0;
    case 2: return (-3 * t * t * t + 3 * t * t + 3 * t + 1) / 6.0;
    default: return t * t * t / 6.0;
  }
}

}  // namespace detail

/// A continuous texture over target-frame pixel coordinates.
class Texture {
 public:
  Texture() = default;
  Texture(const SceneConfig& cfg, std::uint64_t surface, int pad)
      : style_(cfg.texture_style), pad_(pad) {
    Rng rng(cfg.texture_seed * 7919 + surface);
    if (style_ == TextureStyle::Checker) {
      cell_ = 6 + static_cast<int>(rng.next() % 4);
      for (int c = 0; c < cfg.channels; ++c) {
        lo_.push_back(0.2 + 0.2 * rng.uniform());
        hi_.push_back(0.6 + 0.2 * rng.uniform());
      }
      return;
    }
    grid_ = Raster<double>(cfg.width + 2 * pad, cfg.height + 2 * pad, cfg.channels);
    for (double& v : grid_.data()) v = rng.uniform();
    detail::box_blur(grid_, cfg.texture_blur);
    detail::box_blur(grid_, cfg.texture_blur);
    // Re-center every channel at 0.5 with the requested contrast, kept in (0, 1).
    const std::size_t n = grid_.pixel_count();
    for (int c = 0; c < grid_.channels(); ++c) {
      double mean = 0.0, sq = 0.0, dev = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += grid_.data()[i * grid_.channels() + c];
      mean /= n;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = grid_.data()[i * grid_.channels() + c] - mean;
        sq += d * d;
        dev = std::max(dev, std::abs(d));
      }
      const double sd = std::sqrt(sq / n);
      const double gain = std::min(cfg.texture_contrast / std::max(sd, 1e-12), 0.45 / std::max(dev, 1e-12));
      for (std::size_t i = 0; i < n; ++i) {
        double& v = grid_.data()[i * grid_.channels() + c];
        v = 0.5 + (v - mean) * gain;
      }
    }
  }

  /// Value at continuous target pixel coordinates (u, v).
  double operator()(double u, double v, int c) const {
    if (style_ == TextureStyle::Checker) {
      const long iu = static_cast<long>(std::floor((u + 1000.0) / cell_));
      const long iv = static_cast<long>(std::floor((v + 1000.0) / cell_));
      return ((iu + iv) % 2 == 0) ? lo_[c] : hi_[c];
    }
    const double gu = std::clamp(u + pad_, 1.0, grid_.width() - 3.0);
    const double gv = std::clamp(v + pad_, 1.0, grid_.height() - 3.0);
    const int iu = static_cast<int>(std::floor(gu));
    const int iv = static_cast<int>(std::floor(gv));
    const double tu = gu - iu, tv = gv - iv;
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double wv = detail::bspline_weight(tv, j);
      double row = 0.0;
      for (int i = 0; i < 4; ++i) row += detail::bspline_weight(tu, i) * grid_(iu - 1 + i, iv - 1 + j, c);
      acc += wv * row;
    }
    return acc;
  }

 private:
  TextureStyle style_ = TextureStyle::SmoothNoise;
  int pad_ = 0;
  Raster<double> grid_;
  int cell_ = 8;
  std::vector<double> lo_, hi_;
};

// ---------------------------------------------------------------------------
// Scene

struct SyntheticScene {
  SceneConfig config;
  Image<double> prev, target, next;
  DepthMap<double> depth;
  /// One-hot ground truth: channel j < objects.size() is object j, the last
  /// channel is the background.
  MaskStack<double> masks;
  /// transforms[0] for the previous frame, transforms[1] for the next; same
  /// channel order as `masks`.
  std::vector<TransformSet<double>> transforms;
  /// Per source view: target pixels whose 3x3 neighbourhood is not cleanly
  /// visible in that view (occluded, dis-occluded, out of view, or sampling
  /// across a surface boundary).
  std::vector<BoolMap> occluded;
  std::vector<std::string> degenerate_objects;

  int component_count() const { return static_cast<int>(config.objects.size()) + 1; }
  bool degenerate_motion() const { return !degenerate_objects.empty(); }

  Observation observation() const { return {target, {prev, next}, config.intrinsics}; }

  /// Union of the object components.
  BoolMap moving_region() const {
    BoolMap r(depth.width(), depth.height(), 1, 0);
    const int bg = component_count() - 1;
    for (int y = 0; y < depth.height(); ++y) {
      for (int x = 0; x < depth.width(); ++x) r(x, y) = masks(x, y, bg) < 0.5 ? 1 : 0;
    }
    return r;
  }

  /// Pixels cleanly visible in at least one source view.
  BoolMap clean_region() const {
    BoolMap r(depth.width(), depth.height(), 1, 0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      bool any = false;
      for (const auto& o : occluded) any = any || !o.data()[i];
      r.data()[i] = any ? 1 : 0;
    }
    return r;
  }
};

namespace detail {

inline constexpr int kTexturePad = 24;

struct Surface {
  std::array<double, 3> normal;  // plane n . x = 1 in the target frame
  bool bounded;
  double u_lo, u_hi, v_lo, v_hi;  // continuous target pixel extent
  Mat3<double> rot;               // target -> frame
  std::array<double, 3> trans;
};

inline bool same_transform(const RigidTransform<double>& a, const RigidTransform<double>& b) {
  return a.axis_angle == b.axis_angle && a.translation == b.translation;
}

// Ray cast pixel (u, v) of a frame against moved surfaces. Returns the index
// of the nearest hit (or -1) and the target-frame pixel it maps back to.
inline int cast(const std::vector<Surface>& surfaces, const CameraIntrinsics& intr, double u,
                double v, double& tu, double& tv) {
  const std::array<double, 3> ray{(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0};
  int best = -1;
  double best_lambda = 0.0;
  for (std::size_t s = 0; s < surfaces.size(); ++s) {
    const Surface& sf = surfaces[s];
    // x_tgt = R^T (lambda ray - t)
    std::array<double, 3> rt_ray{}, rt_t{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        rt_ray[i] += sf.rot[j][i] * ray[j];
        rt_t[i] += sf.rot[j][i] * sf.trans[j];
      }
    }
    const double n_ray = sf.normal[0] * rt_ray[0] + sf.normal[1] * rt_ray[1] + sf.normal[2] * rt_ray[2];
    const double n_t = sf.normal[0] * rt_t[0] + sf.normal[1] * rt_t[1] + sf.normal[2] * rt_t[2];
    if (!(n_ray > 1e-12)) continue;
    const double lambda = (1.0 + n_t) / n_ray;
    if (!(lambda > kMinDepth)) continue;
    const double px = lambda * rt_ray[0] - rt_t[0];
    const double py = lambda * rt_ray[1] - rt_t[1];
    const double pz = lambda * rt_ray[2] - rt_t[2];
    if (!(pz > kMinDepth)) continue;
    const double pu = intr.fx * (px / pz) + intr.cx;
    const double pv = intr.fy * (py / pz) + intr.cy;
    if (sf.bounded && !(pu >= sf.u_lo && pu < sf.u_hi && pv >= sf.v_lo && pv < sf.v_hi)) continue;
    if (best < 0 || lambda < best_lambda) {
      best = static_cast<int>(s);
      best_lambda = lambda;
      tu = pu;
      tv = pv;
    }
  }
  return best;
}

inline std::vector<Surface> surfaces_for(const SceneConfig& cfg, int frame) {
  // frame: 0 = previous, 1 = target, 2 = next
  auto pick = [&](const RigidTransform<double>& p, const RigidTransform<double>& n) {
    return frame == 0 ? p : frame == 2 ? n : RigidTransform<double>{};
  };
  std::vector<Surface> out;
  for (const auto& o : cfg.objects) {
    const RigidTransform<double> tf = pick(o.prev, o.next);
    out.push_back({{0.0, 0.0, 1.0 / o.depth}, true, o.u0 - 0.5, o.u1 - 0.5, o.v0 - 0.5, o.v1 - 0.5,
                   rotation_of(tf), tf.translation});
  }
  const RigidTransform<double> tf = pick(cfg.ego_prev, cfg.ego_next);
  const std::array<double, 3> n{cfg.background_slope[0], cfg.background_slope[1],
                                1.0 / cfg.background_depth};
  out.push_back({n, false, 0, 0, 0, 0, rotation_of(tf), tf.translation});
  return out;
}

}  // namespace detail

inline void SceneConfig::validate() const {
  if (width < 2 || height < 2) throw ConfigError(name + ": image must be at least 2x2");
  if (channels != 1 && channels != 3) throw ConfigError(name + ": channels must be 1 or 3");
  try {
    intrinsics.validate();
  } catch (const ContractError& e) {
    throw ConfigError(name + ": " + e.what());
  }
  if (!(background_depth > 0.0)) throw ConfigError(name + ": background depth must be positive");
  for (double u : {-0.5, width - 0.5}) {
    for (double v : {-0.5, height - 0.5}) {
      const double d = background_depth_at(u, v);
      if (!(d > 0.0) || !std::isfinite(d)) {
        throw ConfigError(name + ": background plane passes behind the camera");
      }
    }
  }
  if (texture_blur < 0) throw ConfigError(name + ": texture blur must be >= 0");
  for (const auto& o : objects) {
    if (o.u0 < 0 || o.v0 < 0 || o.u1 > width || o.v1 > height || o.u0 >= o.u1 || o.v0 >= o.v1) {
      throw ConfigError(name + ": object " + o.name + " region outside the image");
    }
    for (double u : {o.u0 - 0.5, o.u1 - 0.5}) {
      for (double v : {o.v0 - 0.5, o.v1 - 0.5}) {
        if (!(o.depth > 0.0 && o.depth < background_depth_at(u, v))) {
          throw ConfigError(name + ": object " + o.name + " must lie in front of the background");
        }
      }
    }
  }
  // Every object must stay fully in view in both source frames.
  for (const auto& o : objects) {
    for (int f = 0; f < 2; ++f) {
      const RigidTransform<double>& tf = f == 0 ? o.prev : o.next;
      const double us[2] = {o.u0 - 0.5, o.u1 - 0.5};
      const double vs[2] = {o.v0 - 0.5, o.v1 - 0.5};
      for (double u : us) {
        for (double v : vs) {
          const Point3<double> x = backproject(PixelCoord<double>{u, v}, o.depth, intrinsics);
          const Projection<double> p = project(apply_transform(tf, x), intrinsics);
          if (!p.in_front || p.pixel.u < 0.0 || p.pixel.u > width - 1.0 || p.pixel.v < 0.0 ||
              p.pixel.v > height - 1.0) {
            throw ConfigError(name + ": object " + o.name + " leaves view in frame " +
                              (f == 0 ? "prev" : "next"));
          }
        }
      }
    }
  }
}

/// Renders the triplet and all ground truth. Deterministic in the config.
inline SyntheticScene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  const int w = cfg.width, h = cfg.height, nc = cfg.channels;
  const int n_obj = static_cast<int>(cfg.objects.size());
  const int k = n_obj + 1;
  SyntheticScene sc;
  sc.config = cfg;

  std::vector<Texture> textures;
  for (int s = 0; s < k; ++s) textures.emplace_back(cfg, static_cast<std::uint64_t>(s), detail::kTexturePad);

  std::array<Raster<int>, 3> surface_id;
  std::array<Image<double>*, 3> frames{&sc.prev, &sc.target, &sc.next};
  for (int f = 0; f < 3; ++f) {
    const auto surfaces = detail::surfaces_for(cfg, f);
    *frames[f] = Image<double>(w, h, nc);
    surface_id[f] = Raster<int>(w, h, 1, -1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double tu = 0, tv = 0;
        const int s = detail::cast(surfaces, cfg.intrinsics, x, y, tu, tv);
        surface_id[f](x, y) = s;
        if (s < 0) continue;
        for (int c = 0; c < nc; ++c) (*frames[f])(x, y, c) = textures[s](tu, tv, c);
      }
    }
  }

  sc.depth = DepthMap<double>(w, h, 1);
  sc.masks = MaskStack<double>(w, h, k, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int s = surface_id[1](x, y);
      sc.masks(x, y, s) = 1.0;
      sc.depth(x, y) = s < n_obj ? cfg.objects[s].depth : cfg.background_depth_at(x, y);
    }
  }

  for (int f = 0; f < 2; ++f) {
    TransformSet<double> ts;
    for (const auto& o : cfg.objects) ts.push_back(f == 0 ? o.prev : o.next);
    ts.push_back(f == 0 ? cfg.ego_prev : cfg.ego_next);
    sc.transforms.push_back(ts);
  }
  for (const auto& o : cfg.objects) {
    if (detail::same_transform(o.prev, cfg.ego_prev) && detail::same_transform(o.next, cfg.ego_next)) {
      sc.degenerate_objects.push_back(o.name);
    }
  }

  // Occlusion bookkeeping: a target pixel samples cleanly from a source if
  // its true correspondence lands in view and all four bilinear neighbours
  // show the same surface.
  for (int f = 0; f < 2; ++f) {
    const Raster<int>& ids = surface_id[f == 0 ? 0 : 2];
    BoolMap bad(w, h, 1, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int s = surface_id[1](x, y);
        const Point3<double> pt =
            backproject(PixelCoord<double>{double(x), double(y)}, sc.depth(x, y), cfg.intrinsics);
        const Projection<double> p = project(apply_transform(sc.transforms[f][s], pt), cfg.intrinsics);
        bool ok = p.in_front && p.pixel.u >= 0.0 && p.pixel.u <= w - 1.0 && p.pixel.v >= 0.0 &&
                  p.pixel.v <= h - 1.0;
        if (ok) {
          const int x0 = std::min(static_cast<int>(std::floor(p.pixel.u)), w - 2);
          const int y0 = std::min(static_cast<int>(std::floor(p.pixel.v)), h - 2);
          for (int dy = 0; dy <= 1 && ok; ++dy) {
            for (int dx = 0; dx <= 1 && ok; ++dx) ok = ids(x0 + dx, y0 + dy) == s;
          }
        }
        bad(x, y) = ok ? 0 : 1;
      }
    }
    BoolMap dilated(w, h, 1, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        unsigned char any = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            any |= bad(detail::reflect(x + dx, w), detail::reflect(y + dy, h));
          }
        }
        dilated(x, y) = any;
      }
    }
    sc.occluded.push_back(dilated);
  }
  return sc;
}

/// Checksum over frames and depth; pins generated fixtures.
inline std::uint64_t scene_checksum(const SyntheticScene& sc) {
  std::uint64_t h = io::checksum(sc.prev);
  h = io::checksum(sc.target, h);
  h = io::checksum(sc.next, h);
  return io::checksum(sc.depth, h);
}

// ---------------------------------------------------------------------------
// Reference warp: straight loops over rows, columns and components, with its
// own Rodrigues and bilinear code.

inline WarpResult<double> oracle_warp(const DepthMap<double>& depth, const MaskStack<double>& masks,
                                      const TransformSet<double>& ts, const Image<double>& src,
                                      const CameraIntrinsics& intr) {
  if (!depth.same_shape(masks) || !depth.same_shape(src)) throw ContractError("oracle_warp: shape mismatch");
  if (static_cast<std::size_t>(masks.channels()) != ts.size()) {
    throw ContractError("oracle_warp: mask K does not match transform count");
  }
  const int w = depth.width(), h = depth.height(), k = masks.channels(), nc = src.channels();
  std::vector<std::array<double, 9>> rot(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto& aa = ts[i].axis_angle;
    const double th = std::sqrt(aa[0] * aa[0] + aa[1] * aa[1] + aa[2] * aa[2]);
    double ux = 0, uy = 0, uz = 0, s = 0, c = 1;
    if (th > 1e-12) {
      ux = aa[0] / th;
      uy = aa[1] / th;
      uz = aa[2] / th;
      s = std::sin(th);
      c = std::cos(th);
    }
    const double oc = 1 - c;
    rot[i] = {c + ux * ux * oc,      ux * uy * oc - uz * s, ux * uz * oc + uy * s,
              uy * ux * oc + uz * s, c + uy * uy * oc,      uy * uz * oc - ux * s,
              uz * ux * oc - uy * s, uz * uy * oc + ux * s, c + uz * uz * oc};
  }
  WarpResult<double> out{Image<double>(w, h, nc, 0.0), ValidityMask(w, h, 1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = depth(x, y);
      const double px = (x - intr.cx) / intr.fx * d;
      const double py = (y - intr.cy) / intr.fy * d;
      const double pz = d;
      double qx = 0, qy = 0, qz = 0;
      for (int i = 0; i < k; ++i) {
        const auto& r = rot[i];
        const double m = masks(x, y, i);
        qx += m * (r[0] * px + r[1] * py + r[2] * pz + ts[i].translation[0]);
        qy += m * (r[3] * px + r[4] * py + r[5] * pz + ts[i].translation[1]);
        qz += m * (r[6] * px + r[7] * py + r[8] * pz + ts[i].translation[2]);
      }
      if (!(qz > kMinDepth)) {
        out.validity(x, y) = PixelState::BehindCamera;
        continue;
      }
      const double u = intr.fx * qx / qz + intr.cx;
      const double v = intr.fy * qy / qz + intr.cy;
      if (!(u >= 0 && u <= w - 1 && v >= 0 && v <= h - 1)) {
        out.validity(x, y) = PixelState::OutOfView;
        continue;
      }
      out.validity(x, y) = PixelState::Valid;
      const int x0 = std::min(static_cast<int>(u), std::max(w - 2, 0));
      const int y0 = std::min(static_cast<int>(v), std::max(h - 2, 0));
      const double ax = u - x0, ay = v - y0;
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int dy = 0; dy <= 1; ++dy) {
          for (int dx = 0; dx <= 1; ++dx) {
            const double wt = (dx ? ax : 1 - ax) * (dy ? ay : 1 - ay);
            if (wt == 0.0) continue;
            acc += wt * src(std::min(x0 + dx, w - 1), std::min(y0 + dy, h - 1), c);
          }
        }
        out.image(x, y, c) = acc;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene files (flat key-value). Schema:
//
//   name, width, height, channels, fx, fy, cx, cy, background_depth,
//   background_slope = sx sy (inverse depth per normalized image unit),
//   texture_seed, texture_style (smooth-noise | checker), texture_blur,
//   texture_contrast, ego_prev, ego_next,
//   object.count, object.<i>.name, object.<i>.rect = u0 v0 u1 v1,
//   object.<i>.depth, object.<i>.prev, object.<i>.next
//
// Transforms are six numbers: axis-angle (radians) then translation, each
// mapping target-frame points into that source frame.

namespace detail {

inline RigidTransform<double> parse_transform(const io::KeyValues& kv, const std::string& key) {
  const auto v = kv.numbers(key);
  if (v.size() != 6) throw ConfigError("key " + key + " expects 6 numbers");
  return {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
}

inline std::string format_transform(const RigidTransform<double>& tf) {
  std::string s;
  for (int i = 0; i < 3; ++i) s += (i ? " " : "") + io::format_double(tf.axis_angle[i]);
  for (int i = 0; i < 3; ++i) s += " " + io::format_double(tf.translation[i]);
  return s;
}

}  // namespace detail

inline SceneConfig scene_config_from(const io::KeyValues& kv) {
  SceneConfig c;
  c.name = kv.str("name", "scene");
  c.width = static_cast<int>(kv.integer("width", 64));
  c.height = static_cast<int>(kv.integer("height", 48));
  c.channels = static_cast<int>(kv.integer("channels", 3));
  c.intrinsics = {kv.number("fx"), kv.number("fy"), kv.number("cx"), kv.number("cy")};
  c.background_depth = kv.number("background_depth");
  if (kv.has("background_slope")) {
    const auto sl = kv.numbers("background_slope");
    if (sl.size() != 2) throw ConfigError("key background_slope expects 2 numbers");
    c.background_slope = {sl[0], sl[1]};
  }
  c.texture_seed = static_cast<std::uint64_t>(kv.integer("texture_seed", 1));
  const std::string style = kv.str("texture_style", "smooth-noise");
  if (style == "smooth-noise") {
    c.texture_style = TextureStyle::SmoothNoise;
  } else if (style == "checker") {
    c.texture_style = TextureStyle::Checker;
  } else {
    throw ConfigError("unknown texture_style " + style);
  }
  c.texture_blur = static_cast<int>(kv.integer("texture_blur", 3));
  c.texture_contrast = kv.number("texture_contrast", 0.2);
  c.ego_prev = kv.has("ego_prev") ? detail::parse_transform(kv, "ego_prev") : RigidTransform<double>{};
  c.ego_next = kv.has("ego_next") ? detail::parse_transform(kv, "ego_next") : RigidTransform<double>{};
  const long n = kv.integer("object.count", 0);
  for (long i = 0; i < n; ++i) {
    const std::string p = "object." + std::to_string(i) + ".";
    SceneObject o;
    o.name = kv.str(p + "name", "object" + std::to_string(i));
    const auto r = kv.numbers(p + "rect");
    if (r.size() != 4) throw ConfigError("key " + p + "rect expects 4 numbers");
    o.u0 = static_cast<int>(r[0]);
    o.v0 = static_cast<int>(r[1]);
    o.u1 = static_cast<int>(r[2]);
    o.v1 = static_cast<int>(r[3]);
    o.depth = kv.number(p + "depth");
    o.prev = detail::parse_transform(kv, p + "prev");
    o.next = detail::parse_transform(kv, p + "next");
    c.objects.push_back(o);
  }
  return c;
}

inline SceneConfig load_scene_config(const std::filesystem::path& path) {
  return scene_config_from(io::KeyValues::load(path));
}

inline std::string serialize_scene_config(const SceneConfig& c) {
  io::KeyValues kv;
  kv.set("name", c.name);
  kv.set("width", std::to_string(c.width));
  kv.set("height", std::to_string(c.height));
  kv.set("channels", std::to_string(c.channels));
  kv.set("fx", io::format_double(c.intrinsics.fx));
  kv.set("fy", io::format_double(c.intrinsics.fy));
  kv.set("cx", io::format_double(c.intrinsics.cx));
  kv.set("cy", io::format_double(c.intrinsics.cy));
  kv.set("background_depth", io::format_double(c.background_depth));
  kv.set("background_slope", io::format_double(c.background_slope[0]) + " " +
                                 io::format_double(c.background_slope[1]));
  kv.set("texture_seed", std::to_string(c.texture_seed));
  kv.set("texture_style", c.texture_style == TextureStyle::Checker ? "checker" : "smooth-noise");
  kv.set("texture_blur", std::to_string(c.texture_blur));
  kv.set("texture_contrast", io::format_double(c.texture_contrast));
  kv.set("ego_prev", detail::format_transform(c.ego_prev));
  kv.set("ego_next", detail::format_transform(c.ego_next));
  kv.set("object.count", std::to_string(c.objects.size()));
  for (std::size_t i = 0; i < c.objects.size(); ++i) {
    const auto& o = c.objects[i];
    const std::string p = "object." + std::to_string(i) + ".";
    kv.set(p + "name", o.name);
    kv.set(p + "rect", std::to_string(o.u0) + " " + std::to_string(o.v0) + " " +
                           std::to_string(o.u1) + " " + std::to_string(o.v1));
    kv.set(p + "depth", io::format_double(o.depth));
    kv.set(p + "prev", detail::format_transform(o.prev));
    kv.set(p + "next", detail::format_transform(o.next));
  }
  return kv.serialize();
}

/// Writes frames (PFM + PPM), depth (PFM), masks and a manifest to `dir`.
inline void export_scene(const SyntheticScene& sc, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_text(dir / "scene.cfg", serialize_scene_config(sc.config));
  const std::pair<const char*, const Image<double>*> frames[] = {
      {"prev", &sc.prev}, {"target", &sc.target}, {"next", &sc.next}};
  std::string manifest = "name = " + sc.config.name + "\n";
  for (const auto& [name, img] : frames) {
    io::write_pfm(dir / (std::string(name) + ".pfm"), *img);
    io::write_pnm(dir / (std::string(name) + ".ppm"), *img);
    manifest += std::string(name) + " = " + name + ".pfm\n";
  }
  io::write_pfm(dir / "depth.pfm", sc.depth);
  manifest += "depth = depth.pfm\n";
  manifest += "checksum = " + io::hex64(scene_checksum(sc)) + "\n";
  io::write_text(dir / "manifest.txt", manifest);
}

// ---------------------------------------------------------------------------
// Procedural fixture family used by tests and the selfcheck.

/// A random but valid two-object scene: lateral ego motion, objects moving
/// across the epipolar direction. Deterministic in `seed`.
inline SceneConfig random_scene_config(std::uint64_t seed, int n_objects = 2) {
  Rng rng(seed);
  SceneConfig c;
  c.name = "random-" + std::to_string(seed);
  c.texture_seed = seed + 1000;
  c.background_depth = rng.uniform(8.0, 12.0);
  const double tx = rng.uniform(0.2, 0.35) * (rng.next() % 2 ? 1 : -1);
  const double tz = rng.uniform(-0.1, 0.1);
  c.ego_next = {{rng.uniform(-0.004, 0.004), rng.uniform(-0.004, 0.004), 0.0}, {tx, rng.uniform(-0.03, 0.03), tz}};
  c.ego_prev = {{-c.ego_next.axis_angle[0], -c.ego_next.axis_angle[1], 0.0},
                {-tx, -c.ego_next.translation[1], -tz}};
  for (int i = 0; i < n_objects; ++i) {
    SceneObject o;
    o.name = "obj" + std::to_string(i);
    const int ow = 12 + static_cast<int>(rng.next() % 6);
    const int oh = 10 + static_cast<int>(rng.next() % 6);
    const int slot_w = c.width / n_objects;
    o.u0 = i * slot_w + 6 + static_cast<int>(rng.next() % std::max(1, slot_w - ow - 12));
    o.v0 = 12 + static_cast<int>(rng.next() % std::max(1, c.height - oh - 24));
    o.u1 = o.u0 + ow;
    o.v1 = o.v0 + oh;
    o.depth = rng.uniform(4.0, 6.5);
    const double vy = rng.uniform(0.08, 0.14) * (i % 2 ? 1 : -1);
    o.next = c.ego_next;
    o.next.translation[1] += vy;
    o.prev = c.ego_prev;
    o.prev.translation[1] -= vy;
    c.objects.push_back(o);
  }
  return c;
}

/// Static scene: a tilted background plane (near at the bottom, far at the
/// top) plus `n_boxes` boxes, everything moving only with the camera, which
/// translates sideways and forward.
inline SceneConfig static_scene_config(std::uint64_t seed, int n_boxes = 0) {
  Rng rng(seed);
  SceneConfig c;
  c.name = "static-" + std::to_string(seed);
  c.texture_seed = seed + 2000;
  c.background_depth = 6.0;
  c.background_slope = {rng.uniform(-0.03, 0.03), 0.15};
  // Forward motion pins depth along the vertical flow component, which a
  // small yaw cannot imitate.
  const double tx = rng.uniform(0.25, 0.35);
  c.ego_next = {{0.0, rng.uniform(-0.003, 0.003), 0.0},
                {tx, rng.uniform(-0.03, 0.03), rng.uniform(0.15, 0.25)}};
  c.ego_prev = {{0.0, -c.ego_next.axis_angle[1], 0.0},
                {-tx, -c.ego_next.translation[1], -c.ego_next.translation[2]}};
  const int rects[4][4] = {{11, 9, 24, 20}, {40, 8, 53, 19}, {12, 27, 25, 38}, {39, 27, 52, 38}};
  const double depths[4] = {4.0, 4.4, 3.6, 3.8};
  for (int i = 0; i < std::min(n_boxes, 4); ++i) {
    SceneObject o;
    o.name = "box" + std::to_string(i);
    o.u0 = rects[i][0];
    o.v0 = rects[i][1];
    o.u1 = rects[i][2];
    o.v1 = rects[i][3];
    o.depth = depths[i] + rng.uniform(-0.2, 0.2);
    o.prev = c.ego_prev;
    o.next = c.ego_next;
    c.objects.push_back(o);
  }
  return c;
}

/// Static background of static_scene_config(seed) plus two 16x14 boxes at
/// depth 5 moving vertically in opposite directions, 0.2 units per frame on
/// top of the camera motion.
inline SceneConfig two_movers_config(std::uint64_t seed = 1) {
  SceneConfig c = static_scene_config(seed, 0);
  c.name = "two-movers-" + std::to_string(seed);
  const int corners[2][2] = {{10, 16}, {38, 16}};
  const double vy[2] = {-0.2, 0.2};
  for (int i = 0; i < 2; ++i) {
    SceneObject o;
    o.name = "mover" + std::to_string(i);
    o.u0 = corners[i][0];
    o.v0 = corners[i][1];
    o.u1 = o.u0 + 16;
    o.v1 = o.v0 + 14;
    o.depth = 5.0;
    o.next = c.ego_next;
    o.next.translation[1] += vy[i];
    o.prev = c.ego_prev;
    o.prev.translation[1] -= vy[i];
    c.objects.push_back(o);
  }
  return c;
}

}  // namespace kmotion
