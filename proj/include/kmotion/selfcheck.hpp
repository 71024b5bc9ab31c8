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

// Fast invariant suite shared by `kmotion selfcheck` and the acceptance
// binary. Each group reports pass/fail with a one-line detail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kmotion/decomposition.hpp"
#include "kmotion/diff.hpp"
#include "kmotion/eval.hpp"
#include "kmotion/fixtures.hpp"
#include "kmotion/geometry.hpp"
#include "kmotion/losses.hpp"
#include "kmotion/optim.hpp"
#include "kmotion/random.hpp"
#include "kmotion/synth.hpp"
#include "kmotion/warp.hpp"

namespace kmotion::selfcheck {

struct GroupResult {
  std::string name;
  bool ok = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  /// Directory holding MANIFEST and the fixture files; skipped when empty.
  std::filesystem::path fixtures;
  /// Mutation hook: negate the recorded partials of this op kind while the
  /// gradient group runs.
  std::optional<diff::Op> flip;
  int gradient_instances = 104;
  int oracle_scenes = 100;
  double gradient_step = 1e-5;
  double gradient_tolerance = 1e-3;
};

namespace detail {

struct GradCase {
  const char* name;
  std::function<diff::GradReport(Rng&, double)> run;
};

inline std::vector<std::size_t> pick(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(static_cast<std::size_t>(rng.below(n)));
  return out;
}

inline Image<double> smooth_image(int w, int h, int c, Rng& rng) {
  const double a = rng.uniform(0.5, 1.2), b = rng.uniform(0.4, 0.9), p = rng.uniform(0, 3);
  Image<double> img(w, h, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        img(x, y, k) = 0.5 + 0.35 * std::sin(a * x + p + k) * std::cos(b * y + 0.3 * k);
      }
    }
  }
  return img;
}

inline std::vector<double> uniform_vector(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Every case draws a random smooth instance and checks a few coordinates.
inline std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> cases;
  cases.push_back({"backproject-transform-project", [](Rng& rng, double h) {
    const CameraIntrinsics intr{rng.uniform(20, 60), rng.uniform(20, 60), rng.uniform(10, 30),
                                rng.uniform(10, 20)};
    const double u = rng.uniform(0, 40), v = rng.uniform(0, 30);
    std::vector<double> x = uniform_vector(rng, 7, -20, 20);
    x[0] = rng.uniform(2, 10);
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      const Point3<T> pt = backproject(PixelCoord<double>{u, v}, p[0], intr);
      const auto tf = decode_pose(p.subspan(1, 6));
      const auto q = project(apply_transform(tf, pt), intr).pixel;
      return q.u * 0.7 + q.v * -0.4;
    };
    return diff::grad_check(f, x, h);
  }});
  cases.push_back({"rotation", [](Rng& rng, double h) {
    const auto aa = rng.on_sphere(rng.uniform(0.01, 2.5));
    std::vector<double> x{aa[0], aa[1], aa[2]};
    const auto w = uniform_vector(rng, 9, -1, 1);
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      const Mat3<T> r = rotation_of(RigidTransform<T>{{p[0], p[1], p[2]}, {}});
      T acc = T(0.0);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) acc = acc + w[i * 3 + j] * r[i][j];
      }
      return acc;
    };
    return diff::grad_check(f, x, h);
  }});
  cases.push_back({"mask-normalization-blend", [](Rng& rng, double h) {
    const int k = 2 + static_cast<int>(rng.below(3));
    std::vector<double> x = uniform_vector(rng, static_cast<std::size_t>(k) * 7, -2, 2);
    const Point3<double> pt{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(3, 8)};
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      MaskLogits<T> l(1, 1, k);
      TransformSet<T> ts;
      for (int c = 0; c < k; ++c) {
        l(0, 0, c) = p[c];
        ts.push_back(decode_pose(p.subspan(k + 6 * c, 6)));
      }
      const auto m = normalize_masks(l, OrderingWeights::ordered(k));
      const Point3<T> x3{T(pt.x), T(pt.y), T(pt.z)};
      const auto q = blend_transform(m, ts, PixelCoord<int>{0, 0}, x3);
      return q.x * 0.3 + q.y * 0.5 - q.z * 0.2;
    };
    return diff::grad_check(f, x, h);
  }});
  cases.push_back({"bilinear-sample", [](Rng& rng, double h) {
    const auto img = smooth_image(7, 6, 3, rng);
    std::vector<double> x{rng.uniform(0.1, 5.9), rng.uniform(0.1, 4.9)};
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      const auto s = bilinear_sample(img, PixelCoord<T>{p[0], p[1]});
      return s.color[0] + 0.5 * s.color[1] - s.color[2];
    };
    return diff::grad_check(f, x, h);
  }});
  cases.push_back({"synthesize-view", [](Rng& rng, double h) {
    const int w = 8, hh = 6, k = 2;
    const std::size_t n = static_cast<std::size_t>(w) * hh;
    const auto src = smooth_image(w, hh, 1, rng);
    const CameraIntrinsics intr{8, 8, 3.5, 2.5};
    std::vector<double> x = uniform_vector(rng, n, std::log(3.0), std::log(5.0));
    const auto rest = uniform_vector(rng, n * k + 6 * k, -2, 2);
    x.insert(x.end(), rest.begin(), rest.end());
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      DepthMap<T> d(w, hh, 1);
      for (std::size_t i = 0; i < n; ++i) d.data()[i] = diff::exp(p[i]);
      MaskLogits<T> l(w, hh, k);
      for (std::size_t i = 0; i < n * k; ++i) l.data()[i] = p[n + i];
      TransformSet<T> ts;
      for (int c = 0; c < k; ++c) ts.push_back(decode_pose(p.subspan(n + n * k + 6 * c, 6)));
      const auto out = synthesize_view(d, normalize_masks(l, OrderingWeights::ordered(k)), ts, src, intr);
      std::vector<T> vals;
      for (std::size_t i = 0; i < n; ++i) {
        if (out.validity.data()[i] == PixelState::Valid) vals.push_back(out.image.data()[i]);
      }
      return diff::sum(std::span<const T>(vals)) * (1.0 / static_cast<double>(n));
    };
    return diff::grad_check(f, x, h, pick(rng, x.size(), 6));
  }});
  cases.push_back({"mask-pyramid", [](Rng& rng, double h) {
    kmotion::detail::FitVariables v{8, 6, 3, 0, {}, {}, {}, kmotion::detail::logit_levels(8, 6, 3, {1, 2, 4})};
    v.logits = uniform_vector(rng, v.levels.back().offset + v.levels.back().size(3), -2, 2);
    const std::vector<double> ld(48, 0.0);
    const auto w = uniform_vector(rng, 48 * 3, -1, 1);
    const std::vector<double> x = v.logits;
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      const std::vector<T> d(ld.begin(), ld.end());
      const auto pr = kmotion::detail::build_prediction<T>(v, std::span<const T>(d), p, std::span<const T>(), LossConfig{});
      return diff::weighted_sum(std::span<const T>(pr.masks.data()), std::span<const double>(w));
    };
    return diff::grad_check(f, x, h, pick(rng, x.size(), 6));
  }});
  cases.push_back({"ssim", [](Rng& rng, double h) {
    const auto a = smooth_image(5, 4, 1, rng);
    std::vector<double> x = a.data();
    for (double& v : x) v = std::clamp(v + rng.uniform(-0.2, 0.2), 0.0, 1.0);
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      Image<T> b(5, 4, 1);
      std::copy(p.begin(), p.end(), b.data().begin());
      const auto s = ssim_map(lift<T>(a), b);
      return diff::sum(std::span<const T>(s.data()));
    };
    return diff::grad_check(f, x, h, pick(rng, x.size(), 6));
  }});
  cases.push_back({"photometric-min", [](Rng& rng, double h) {
    const auto t = smooth_image(5, 4, 3, rng);
    std::vector<double> x;
    for (int s = 0; s < 2; ++s) {
      for (double v : t.data()) x.push_back(std::clamp(v + rng.uniform(-0.3, 0.3), 0.0, 1.0));
    }
    const std::size_t n = t.size();
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      std::vector<WarpResult<T>> warped;
      for (int s = 0; s < 2; ++s) {
        WarpResult<T> wr{Image<T>(5, 4, 3), ValidityMask(5, 4, 1, PixelState::Valid)};
        std::copy_n(p.begin() + s * n, n, wr.image.data().begin());
        warped.push_back(wr);
      }
      const auto r = photometric_loss(lift<T>(t), warped, 0.85);
      return diff::sum(std::span<const T>(r.loss.data()));
    };
    return diff::grad_check(f, x, h, pick(rng, x.size(), 6));
  }});
  cases.push_back({"smoothness", [](Rng& rng, double h) {
    const auto img = smooth_image(6, 5, 3, rng);
    std::vector<double> x = uniform_vector(rng, 30, 1, 10);
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      DepthMap<T> d(6, 5, 1);
      std::copy(p.begin(), p.end(), d.data().begin());
      return smoothness_loss(d, img);
    };
    return diff::grad_check(f, x, h, pick(rng, x.size(), 6));
  }});
  cases.push_back({"mask-smoothness", [](Rng& rng, double h) {
    const auto img = smooth_image(6, 5, 3, rng);
    std::vector<double> x = uniform_vector(rng, 60, -2, 2);
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      MaskLogits<T> l(6, 5, 2);
      std::copy(p.begin(), p.end(), l.data().begin());
      return mask_smoothness_loss(normalize_masks(l, OrderingWeights::flat(2)), img);
    };
    return diff::grad_check(f, x, h, pick(rng, x.size(), 6));
  }});
  cases.push_back({"total-loss", [](Rng& rng, double h) {
    const int w = 8, hh = 6, k = 2;
    const std::size_t n = static_cast<std::size_t>(w) * hh;
    const Observation obs{smooth_image(w, hh, 3, rng), {smooth_image(w, hh, 3, rng), smooth_image(w, hh, 3, rng)},
                          CameraIntrinsics{8, 8, 3.5, 2.5}};
    LossConfig lc = rng.below(2) ? LossConfig::mask_smoothing_baseline() : LossConfig{};
    lc.scales = {1.0, 0.5};
    std::vector<double> x = uniform_vector(rng, n, std::log(3.0), std::log(5.0));
    const auto rest = uniform_vector(rng, n * k + 12 * k, -2, 2);
    x.insert(x.end(), rest.begin(), rest.end());
    auto f = [&](auto p) {
      using T = std::remove_cvref_t<decltype(p[0])>;
      Prediction<T> pr{DepthMap<T>(w, hh, 1), {}, {}};
      for (std::size_t i = 0; i < n; ++i) pr.depth.data()[i] = diff::exp(p[i]);
      MaskLogits<T> l(w, hh, k);
      for (std::size_t i = 0; i < n * k; ++i) l.data()[i] = p[n + i];
      pr.masks = normalize_masks(l, lc.use_depth_ordering ? OrderingWeights::ordered(k)
                                                          : OrderingWeights::flat(k));
      for (int s = 0; s < 2; ++s) {
        TransformSet<T> ts;
        for (int c = 0; c < k; ++c) ts.push_back(decode_pose(p.subspan(n + n * k + 6 * (s * k + c), 6)));
        pr.poses.push_back(ts);
      }
      return total_loss(obs, pr, lc).total;
    };
    return diff::grad_check(f, x, h, pick(rng, x.size(), 6));
  }});
  return cases;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace detail

/// Analytic vs central-difference gradients over random smooth instances of
/// every loss and geometric operation.
inline GroupResult gradients(const Options& opt) {
  GroupResult g{"gradients"};
  std::optional<diff::testing::ScopedSignFlip> flip;
  if (opt.flip) flip.emplace(*opt.flip);
  const auto cases = detail::gradient_cases();
  Rng rng(20240601);
  double worst = 0.0;
  std::string worst_case;
  for (int i = 0; i < opt.gradient_instances; ++i) {
    const auto& c = cases[static_cast<std::size_t>(i) % cases.size()];
    const auto r = c.run(rng, opt.gradient_step);
    if (worst_case.empty() || r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_case = c.name;
    }
  }
  g.ok = worst < opt.gradient_tolerance;
  g.detail = std::to_string(opt.gradient_instances) + " instances, max relative error " +
             detail::fmt(worst) + " (" + worst_case + ")";
  return g;
}

/// synthesize_view against the loop oracle on seeded scenes, with both the
/// ground-truth one-hot masks and random soft masks.
inline GroupResult warp_oracle(const Options& opt) {
  GroupResult g{"warp-oracle"};
  double worst = 0.0;
  bool validity_ok = true;
  for (int s = 1; s <= opt.oracle_scenes; ++s) {
    const auto sc = generate_scene(random_scene_config(static_cast<std::uint64_t>(s)));
    Rng rng(static_cast<std::uint64_t>(s));
    MaskLogits<double> l(sc.depth.width(), sc.depth.height(), sc.component_count());
    for (double& v : l.data()) v = rng.uniform(-2, 2);
    const auto masks = s % 2 ? sc.masks : normalize_masks(l, OrderingWeights::ordered(l.channels()));
    const int src = s % 3 == 0 ? 1 : 0;
    const Image<double>& img = src ? sc.next : sc.prev;
    const auto a = synthesize_view(sc.depth, masks, sc.transforms[src], img, sc.config.intrinsics);
    const auto b = oracle_warp(sc.depth, masks, sc.transforms[src], img, sc.config.intrinsics);
    validity_ok = validity_ok && a.validity.data() == b.validity.data();
    for (std::size_t i = 0; i < a.image.size(); ++i) {
      worst = std::max(worst, std::abs(a.image.data()[i] - b.image.data()[i]));
    }
  }
  g.ok = validity_ok && worst <= 1e-12;
  g.detail = std::to_string(opt.oracle_scenes) + " scenes, max |difference| " + detail::fmt(worst) +
             (validity_ok ? "" : ", validity differs");
  return g;
}

inline GroupResult mask_normalization(const Options&) {
  GroupResult g{"mask-normalization"};
  Rng rng(1);
  double worst = 0.0;
  bool in_range = true, shift_ok = true;
  for (int t = 0; t < 200; ++t) {
    const int k = 2 + static_cast<int>(rng.below(8));
    const double scale = t % 2 ? 1e3 : 4.0;
    const auto w = OrderingWeights::ordered(k);
    MaskLogits<double> l(3, 3, k), shifted(3, 3, k);
    for (std::size_t p = 0; p < l.pixel_count(); ++p) {
      const double c = rng.uniform(-30, 30);
      for (int i = 0; i < k; ++i) {
        const double v = rng.uniform(-scale, scale);
        l.data()[p * k + i] = v;
        shifted.data()[p * k + i] = v + c / w.d[i];
      }
    }
    const auto m = normalize_masks(l, w);
    const auto ms = normalize_masks(shifted, w);
    for (std::size_t p = 0; p < m.pixel_count(); ++p) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) {
        const double v = m.data()[p * k + i];
        in_range = in_range && v >= 0.0 && v <= 1.0;
        s += v;
        // Shift invariance is checked on moderate logits only: at 1e3 the
        // shifted value loses bits before the softmax sees it.
        if (scale < 10) shift_ok = shift_ok && std::abs(v - ms.data()[p * k + i]) < 1e-9;
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  g.ok = in_range && shift_ok && worst < 1e-9;
  g.detail = "sum-to-one error " + detail::fmt(worst) + (in_range ? "" : ", value outside [0,1]") +
             (shift_ok ? ", shift invariant" : ", shift invariance violated");
  return g;
}

inline GroupResult blending(const Options&) {
  GroupResult g{"blending"};
  Rng rng(2);
  bool one_hot = true, hull = true;
  for (int t = 0; t < 200; ++t) {
    const int k = 2 + static_cast<int>(rng.below(4));
    TransformSet<double> ts;
    MaskLogits<double> l(1, 1, k);
    for (int i = 0; i < k; ++i) {
      ts.push_back({rng.on_sphere(rng.uniform(0, 1)),
                    {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}});
      l(0, 0, i) = rng.uniform(-3, 3);
    }
    const Point3<double> x{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(1, 9)};
    const int j = static_cast<int>(rng.below(k));
    MaskStack<double> hot(1, 1, k, 0.0);
    hot(0, 0, j) = 1.0;
    const auto a = blend_transform(hot, ts, {0, 0}, x);
    const auto b = apply_transform(ts[j], x);
    one_hot = one_hot && a.x == b.x && a.y == b.y && a.z == b.z;
    const auto p = blend_transform(normalize_masks(l, OrderingWeights::ordered(k)), ts, {0, 0}, x);
    const double pc[3] = {p.x, p.y, p.z};
    for (int axis = 0; axis < 3; ++axis) {
      double lo = 1e300, hi = -1e300;
      for (const auto& tf : ts) {
        const auto q = apply_transform(tf, x);
        const double qc[3] = {q.x, q.y, q.z};
        lo = std::min(lo, qc[axis]);
        hi = std::max(hi, qc[axis]);
      }
      hull = hull && pc[axis] >= lo - 1e-12 && pc[axis] <= hi + 1e-12;
    }
  }
  // Non-SE(3) witness: two opposite rotations blended 50/50 shrink distances.
  const MaskStack<double> half(1, 1, 2, 0.5);
  const TransformSet<double> ts{{{0, 0, 1.0}, {0, 0, 0}}, {{0, 0, -1.0}, {0, 0, 0}}};
  const auto pa = blend_transform(half, ts, {0, 0}, Point3<double>{1, 0, 2});
  const auto pb = blend_transform(half, ts, {0, 0}, Point3<double>{-1, 0, 2});
  const double shrunk = std::hypot(pa.x - pb.x, pa.y - pb.y, pa.z - pb.z);
  const bool witness = std::abs(shrunk - 2.0) > 0.5;
  g.ok = one_hot && hull && witness;
  g.detail = std::string(one_hot ? "one-hot exact" : "one-hot mismatch") +
             (hull ? ", convex hull holds" : ", convex hull violated") +
             ", blended distance 2 -> " + detail::fmt(shrunk);
  return g;
}

inline GroupResult loss_invariants(const Options&) {
  GroupResult g{"loss-invariants"};
  Rng rng(3);
  double scale_err = 0.0;
  bool symmetric = true, monotone = true;
  for (int t = 0; t < 50; ++t) {
    Image<double> img(9, 7, 3), a(9, 7, 3), b(9, 7, 3), c(9, 7, 3);
    for (auto* r : {&img, &a, &b, &c}) {
      for (double& v : r->data()) v = rng.uniform(0, 1);
    }
    DepthMap<double> d(9, 7, 1);
    for (double& v : d.data()) v = rng.uniform(1, 20);
    DepthMap<double> ds = d;
    const double s = std::exp(rng.uniform(-4, 4));
    for (double& v : ds.data()) v *= s;
    scale_err = std::max(scale_err, std::abs(smoothness_loss(d, img) - smoothness_loss(ds, img)));
    symmetric = symmetric && ssim_map(a, b).data() == ssim_map(b, a).data();
    const WarpResult<double> wa{a, ValidityMask(9, 7, 1, PixelState::Valid)};
    WarpResult<double> wb{b, ValidityMask(9, 7, 1, PixelState::Valid)};
    for (auto& v : wb.validity.data()) v = rng.uniform() < 0.3 ? PixelState::OutOfView : v;
    const auto one = photometric_loss(c, {wa}, 0.85);
    const auto two = photometric_loss(c, {wa, wb}, 0.85);
    for (std::size_t i = 0; i < one.loss.size(); ++i) {
      monotone = monotone && two.loss.data()[i] <= one.loss.data()[i];
    }
  }
  g.ok = scale_err < 1e-10 && symmetric && monotone;
  g.detail = "smoothness scale error " + detail::fmt(scale_err) +
             (symmetric ? ", SSIM symmetric" : ", SSIM asymmetric") +
             (monotone ? ", photometric min monotone" : ", extra source increased the loss");
  return g;
}

inline GroupResult metric_identities(const Options&) {
  GroupResult g{"metric-identities"};
  Rng rng(4);
  bool ok = true;
  std::string why;
  DepthMap<double> gt(8, 6, 1);
  for (double& v : gt.data()) v = rng.uniform(1, 50);
  const std::array<double, 7> perfect{0, 0, 0, 0, 1, 1, 1};
  if (depth_metrics(gt, gt).values() != perfect) ok = false, why += " pred=gt";
  DepthMap<double> twice = gt;
  for (double& v : twice.data()) v *= 2.0;
  if (depth_metrics(twice, gt).values() != perfect) ok = false, why += " median-scale";
  const DepthMap<double> four(2, 2, 1, 4.0), five(2, 2, 1, 5.0);
  const auto b = depth_metrics(five, four, nullptr, {.median_scale = false});
  if (b.delta1 != 0.0 || b.delta2 != 1.0) ok = false, why += " delta-boundary";
  const DepthMap<double> ten(3, 3, 1, 10.0), twelve(3, 3, 1, 12.0);
  const auto h = depth_metrics(twelve, ten, nullptr, {.median_scale = false});
  if (std::abs(h.abs_rel - 0.2) > 1e-12 || std::abs(h.sq_rel - 0.4) > 1e-12 ||
      std::abs(h.rmse - 2.0) > 1e-12 || std::abs(h.rmse_log - std::log(1.2)) > 1e-12) {
    ok = false, why += " hand-example";
  }
  g.ok = ok;
  g.detail = ok ? "zeros/ones, scale cancellation, strict delta, hand example" : "failed:" + why;
  return g;
}

/// Checks every MANIFEST entry under `opt.fixtures`.
inline GroupResult fixtures(const Options& opt) {
  GroupResult g{"fixtures"};
  if (opt.fixtures.empty()) {
    g.ok = true;
    g.detail = "skipped (no fixture directory)";
    return g;
  }
  const auto problems = verify_fixtures(opt.fixtures);
  g.ok = problems.empty();
  if (g.ok) {
    g.detail = "manifest verified";
  } else {
    for (std::size_t i = 0; i < problems.size(); ++i) g.detail += (i ? "; " : "") + problems[i];
  }
  return g;
}

using GroupFn = GroupResult (*)(const Options&);

inline const std::vector<std::pair<const char*, GroupFn>>& groups() {
  static const std::vector<std::pair<const char*, GroupFn>> all{
      {"gradients", gradients},           {"warp-oracle", warp_oracle},
      {"mask-normalization", mask_normalization}, {"blending", blending},
      {"loss-invariants", loss_invariants}, {"metric-identities", metric_identities},
      {"fixtures", fixtures}};
  return all;
}

/// Runs the named groups (all when empty), timing each. Exceptions inside a
/// group count as its failure.
inline std::vector<GroupResult> run(const Options& opt, const std::vector<std::string>& only = {}) {
  std::vector<GroupResult> out;
  for (const auto& [name, fn] : groups()) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    GroupResult r;
    try {
      r = fn(opt);
    } catch (const std::exception& e) {
      r = {name, false, std::string("exception: ") + e.what()};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(r);
  }
  return out;
}

}  // namespace kmotion::selfcheck
