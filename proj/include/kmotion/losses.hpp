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

// Self-supervised view-synthesis objective.
//
//   photo(p)  = min over valid sources s of
//               mean_c [ (1 - a) |I_t - W_s| + a/2 (1 - SSIM(I_t, W_s)) ]
//   smooth    = 1/N sum_p |dx d*| exp(-|dx I|) + |dy d*| exp(-|dy I|),
//               d* = (1/D) / mean(1/D), forward differences, |dI| channel mean
//   total     = mean_valid photo + lambda * sum_scales scale * smooth_scale
//               (+ w_mask * mask smoothness when enabled)
//
// SSIM uses a 3x3 mean window with reflection padding, C1 = 0.01^2 and
// C2 = 0.03^2.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "kmotion/decomposition.hpp"
#include "kmotion/diff.hpp"
#include "kmotion/errors.hpp"
#include "kmotion/image.hpp"
#include "kmotion/warp.hpp"

namespace kmotion {

struct LossConfig {
  double alpha = 0.85;
  double lambda_base = 0.001;
  std::vector<double> scales{1.0};
  bool use_depth_ordering = true;
  bool mask_smoothing = false;
  double mask_smooth_weight = 0.001;
  bool auto_mask = false;

  double lambda_for(double scale) const { return lambda_base * scale; }

  /// Baseline regularization: plain softmax masks plus edge-aware mask smoothing.
  static LossConfig mask_smoothing_baseline() {
    LossConfig c;
    c.use_depth_ordering = false;
    c.mask_smoothing = true;
    return c;
  }

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("loss: alpha must lie in [0, 1]");
    if (!(lambda_base > 0.0)) throw ContractError("loss: lambda must be positive");
    if (scales.empty()) throw ContractError("loss: at least one smoothness scale required");
    for (double s : scales) {
      if (s != 1.0 && s != 0.5 && s != 0.25 && s != 0.125) {
        throw ContractError("loss: scales must be drawn from {1, 1/2, 1/4, 1/8}");
      }
    }
    if (!(mask_smooth_weight >= 0.0)) throw ContractError("loss: mask weight must be >= 0");
  }
};

struct LossBreakdown {
  double total = 0.0;
  double photometric = 0.0;
  double smoothness = 0.0;       // sum over scales of scale * smooth_scale
  double mask_smoothness = 0.0;  // 0 unless mask smoothing is enabled
  double lambda = 0.0;
  double mask_weight = 0.0;
  long valid_pixel_count = 0;
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

namespace detail {

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

// 3x3 reflected window mean of one channel of `r`.
template <class T>
Raster<T> box_mean3(const Raster<T>& r, int c) {
  Raster<T> out(r.width(), r.height(), 1);
  std::array<T, 9> win;
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          win[n++] = r(reflect(x + dx, r.width()), reflect(y + dy, r.height()), c);
        }
      }
      out(x, y) = diff::sum(std::span<const T>(win)) * (1.0 / 9.0);
    }
  }
  return out;
}

template <class T>
Raster<T> pointwise_product(const Raster<T>& a, const Raster<T>& b, int c) {
  Raster<T> out(a.width(), a.height(), 1);
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) out(x, y) = a(x, y, c) * b(x, y, c);
  }
  return out;
}

}  // namespace detail

/// Per-pixel, per-channel SSIM in [-1, 1]. Symmetric in its arguments.
template <class T>
Image<T> ssim_map(const Image<T>& a, const Image<T>& b) {
  require_same_shape(a, b, "ssim_map");
  if (a.channels() != b.channels()) throw ContractError("ssim_map: channel mismatch");
  Image<T> out(a.width(), a.height(), a.channels());
  for (int c = 0; c < a.channels(); ++c) {
    const Raster<T> mu_a = detail::box_mean3(a, c);
    const Raster<T> mu_b = detail::box_mean3(b, c);
    const Raster<T> aa = detail::box_mean3(detail::pointwise_product(a, a, c), 0);
    const Raster<T> bb = detail::box_mean3(detail::pointwise_product(b, b, c), 0);
    const Raster<T> ab = detail::box_mean3(detail::pointwise_product(a, b, c), 0);
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < a.width(); ++x) {
        const T& ma = mu_a(x, y);
        const T& mb = mu_b(x, y);
        const T mab = ma * mb;
        const T var_a = aa(x, y) - ma * ma;
        const T var_b = bb(x, y) - mb * mb;
        const T cov = ab(x, y) - mab;
        const T num = (2.0 * mab + kSsimC1) * (2.0 * cov + kSsimC2);
        const T den = (ma * ma + mb * mb + kSsimC1) * (var_a + var_b + kSsimC2);
        out(x, y, c) = num / den;
      }
    }
  }
  return out;
}

/// Per-pixel (1 - a)|t - w| + a/2 (1 - SSIM), averaged over channels.
template <class T>
Raster<T> reprojection_error(const Image<T>& target, const Image<T>& warped, double alpha) {
  require_same_shape(target, warped, "reprojection_error");
  const Image<T> ssim = ssim_map(target, warped);
  const int nc = target.channels();
  Raster<T> out(target.width(), target.height(), 1);
  std::vector<T> terms(static_cast<std::size_t>(nc));
  for (int y = 0; y < target.height(); ++y) {
    for (int x = 0; x < target.width(); ++x) {
      for (int c = 0; c < nc; ++c) {
        const T l1 = diff::abs(target(x, y, c) - warped(x, y, c));
        terms[c] = (1.0 - alpha) * l1 + (0.5 * alpha) * (1.0 - ssim(x, y, c));
      }
      out(x, y) = nc == 1 ? terms[0] : diff::sum(std::span<const T>(terms)) * (1.0 / nc);
    }
  }
  return out;
}

template <class T>
struct PhotometricResult {
  Raster<T> loss;             // per-pixel min over valid sources (0 where invalid)
  ValidityMask validity;      // Valid where at least one source contributes
  Raster<int> chosen_source;  // index of the winning source, -1 when none
};

/// Per-pixel minimum reprojection loss over the warped sources.
///
/// With `unwarped` supplied, pixels where some unwarped source already
/// matches the target better than every warped one are excluded (auto-mask).
template <class T>
PhotometricResult<T> photometric_loss(const Image<T>& target,
                                      const std::vector<WarpResult<T>>& warped,
                                      double alpha,
                                      const std::vector<Image<double>>* unwarped = nullptr) {
  if (warped.empty()) throw ContractError("photometric_loss: no source views");
  const int w = target.width(), h = target.height();
  std::vector<Raster<T>> errors;
  errors.reserve(warped.size());
  for (const auto& wr : warped) {
    require_same_shape(target, wr.image, "photometric_loss");
    require_same_shape(target, wr.validity, "photometric_loss");
    // Invalid samples take the target's value so they do not disturb the
    // SSIM window of valid neighbours; they never enter the loss themselves.
    Image<T> filled = wr.image;
    for (std::size_t i = 0; i < filled.pixel_count(); ++i) {
      if (wr.validity.data()[i] == PixelState::Valid) continue;
      for (int c = 0; c < filled.channels(); ++c) {
        filled.data()[i * filled.channels() + c] = diff::value_of(target.data()[i * filled.channels() + c]);
      }
    }
    errors.push_back(reprojection_error(target, filled, alpha));
  }
  std::vector<Raster<double>> identity;
  if (unwarped != nullptr) {
    const Image<double> t = values_of(target);
    for (const auto& src : *unwarped) identity.push_back(reprojection_error(t, src, alpha));
  }
  PhotometricResult<T> out{Raster<T>(w, h, 1), ValidityMask(w, h, 1, PixelState::OutOfView),
                           Raster<int>(w, h, 1, -1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = -1;
      for (std::size_t s = 0; s < warped.size(); ++s) {
        if (warped[s].validity(x, y) != PixelState::Valid) continue;
        // Ties keep the earlier source.
        if (best < 0 ||
            diff::value_of(errors[s](x, y)) < diff::value_of(errors[best](x, y))) {
          best = static_cast<int>(s);
        }
      }
      if (best < 0) continue;
      if (!identity.empty()) {
        double id_min = identity[0](x, y);
        for (const auto& e : identity) id_min = std::min(id_min, e(x, y));
        if (id_min < diff::value_of(errors[best](x, y))) continue;
      }
      out.loss(x, y) = errors[best](x, y);
      out.validity(x, y) = PixelState::Valid;
      out.chosen_source(x, y) = best;
    }
  }
  return out;
}

namespace detail {

// 1/N sum_p |dx f| exp(-|dx I|) + |dy f| exp(-|dy I|) for one channel of f.
template <class T>
T edge_aware_gradient(const Raster<T>& f, int c, const Image<double>& img) {
  const int w = f.width(), h = f.height(), nc = img.channels();
  auto edge_weight = [&](int x0, int y0, int x1, int y1) {
    double g = 0.0;
    for (int k = 0; k < nc; ++k) g += std::abs(img(x1, y1, k) - img(x0, y0, k));
    return std::exp(-(g / nc));
  };
  std::vector<T> local;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) {
        local.push_back(diff::abs(f(x + 1, y, c) - f(x, y, c)) * edge_weight(x, y, x + 1, y));
      }
      if (y + 1 < h) {
        local.push_back(diff::abs(f(x, y + 1, c) - f(x, y, c)) * edge_weight(x, y, x, y + 1));
      }
    }
  }
  if (local.empty()) return T(0.0);
  return diff::sum(std::span<const T>(local)) * (1.0 / static_cast<double>(w * h));
}

}  // namespace detail

/// Edge-aware smoothness of mean-normalized inverse depth. Invariant to a
/// global rescaling of depth.
template <class T>
T smoothness_loss(const DepthMap<T>& depth, const Image<double>& img) {
  require_same_shape(depth, img, "smoothness_loss");
  const std::size_t n = depth.pixel_count();
  Raster<T> inv(depth.width(), depth.height(), 1);
  for (std::size_t i = 0; i < n; ++i) inv.data()[i] = 1.0 / depth.data()[i];
  const T mean = diff::sum(std::span<const T>(inv.data())) * (1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) inv.data()[i] = inv.data()[i] / mean;
  return detail::edge_aware_gradient(inv, 0, img);
}

/// Edge-aware smoothness applied to each mask channel, summed over channels.
template <class T>
T mask_smoothness_loss(const MaskStack<T>& masks, const Image<double>& img) {
  require_same_shape(masks, img, "mask_smoothness_loss");
  std::vector<T> per_channel;
  for (int c = 0; c < masks.channels(); ++c) {
    per_channel.push_back(detail::edge_aware_gradient(masks, c, img));
  }
  return diff::sum(std::span<const T>(per_channel));
}

/// 2x2 box downsampling (odd trailing rows/columns dropped).
template <class T>
Raster<T> downsample2(const Raster<T>& r) {
  const int w = std::max(r.width() / 2, 1), h = std::max(r.height() / 2, 1);
  Raster<T> out(w, h, r.channels());
  std::array<T, 4> q;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < r.channels(); ++c) {
        const int x0 = std::min(2 * x, r.width() - 1), x1 = std::min(2 * x + 1, r.width() - 1);
        const int y0 = std::min(2 * y, r.height() - 1), y1 = std::min(2 * y + 1, r.height() - 1);
        q = {r(x0, y0, c), r(x1, y0, c), r(x0, y1, c), r(x1, y1, c)};
        out(x, y, c) = diff::sum(std::span<const T>(q)) * 0.25;
      }
    }
  }
  return out;
}

/// Observed frames: the target and its source views, one pose set per source.
struct Observation {
  Image<double> target;
  std::vector<Image<double>> sources;
  CameraIntrinsics intrinsics;
};

template <class T>
struct Prediction {
  DepthMap<T> depth;
  MaskStack<T> masks;
  std::vector<TransformSet<T>> poses;  // one TransformSet per source view
};

template <class T>
struct LossEvaluation {
  T total{};
  LossBreakdown breakdown;
  PhotometricResult<T> photometric;
  std::vector<WarpResult<T>> warped;
};

/// Full objective. `region`, when given, restricts which pixels enter the
/// photometric mean (used to score ground truth on non-occluded pixels).
template <class T>
LossEvaluation<T> total_loss(const Observation& obs, const Prediction<T>& pred,
                             const LossConfig& cfg, const BoolMap* region = nullptr) {
  cfg.validate();
  if (obs.sources.empty()) throw ContractError("total_loss: no source views");
  if (pred.poses.size() != obs.sources.size()) {
    throw ContractError("total_loss: need one transform set per source view");
  }
  require_same_shape(obs.target, pred.depth, "total_loss");
  LossEvaluation<T> ev;
  ev.warped.reserve(obs.sources.size());
  for (std::size_t s = 0; s < obs.sources.size(); ++s) {
    ev.warped.push_back(
        synthesize_view(pred.depth, pred.masks, pred.poses[s], obs.sources[s], obs.intrinsics));
  }
  const Image<T> target = lift<T>(obs.target);
  ev.photometric = photometric_loss(target, ev.warped, cfg.alpha,
                                    cfg.auto_mask ? &obs.sources : nullptr);

  std::vector<T> contributing;
  for (std::size_t i = 0; i < ev.photometric.loss.size(); ++i) {
    if (ev.photometric.validity.data()[i] != PixelState::Valid) continue;
    if (region != nullptr && !region->data()[i]) continue;
    contributing.push_back(ev.photometric.loss.data()[i]);
  }
  if (contributing.empty()) throw DegenerateInputError("total_loss: no valid pixels");
  const T photo = diff::sum(std::span<const T>(contributing)) *
                  (1.0 / static_cast<double>(contributing.size()));

  std::vector<T> per_scale;
  DepthMap<T> depth = pred.depth;
  Image<double> img = obs.target;
  double current = 1.0;
  std::vector<double> scales = cfg.scales;
  std::sort(scales.rbegin(), scales.rend());
  for (double s : scales) {
    while (current > s) {
      depth = downsample2(depth);
      img = downsample2(img);
      current *= 0.5;
    }
    per_scale.push_back(s * smoothness_loss(depth, img));
  }
  const T smooth = diff::sum(std::span<const T>(per_scale));

  T total = photo + cfg.lambda_base * smooth;
  T mask_term = T(0.0);
  if (cfg.mask_smoothing) {
    mask_term = mask_smoothness_loss(pred.masks, obs.target);
    total = total + cfg.mask_smooth_weight * mask_term;
  }
  ev.total = total;
  ev.breakdown.total = diff::value_of(total);
  ev.breakdown.photometric = diff::value_of(photo);
  ev.breakdown.smoothness = diff::value_of(smooth);
  ev.breakdown.mask_smoothness = diff::value_of(mask_term);
  ev.breakdown.lambda = cfg.lambda_base;
  ev.breakdown.mask_weight = cfg.mask_smoothing ? cfg.mask_smooth_weight : 0.0;
  ev.breakdown.valid_pixel_count = static_cast<long>(contributing.size());
  return ev;
}

}  // namespace kmotion
