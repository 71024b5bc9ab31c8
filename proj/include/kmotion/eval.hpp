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

// Depth error metrics and mask scoring.

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "kmotion/decomposition.hpp"
#include "kmotion/errors.hpp"
#include "kmotion/image.hpp"
#include "kmotion/io.hpp"

namespace kmotion {

/// Boolean pixel selection; nonzero means selected.
using RegionMask = BoolMap;

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;

  static constexpr std::array<const char*, 7> kColumns{
      "abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3"};

  std::array<double, 7> values() const {
    return {abs_rel, sq_rel, rmse, rmse_log, delta1, delta2, delta3};
  }
};

inline constexpr double kEvalMinDepth = 1e-3;
inline constexpr double kEvalMaxDepth = 80.0;

struct EvalOptions {
  bool median_scale = true;
  bool clamp = true;
};

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + n / 2));
}

}  // namespace detail

/// Metrics over `region` (all pixels when null). The prediction is median
/// scaled against the ground truth on the same pixels, then both are clamped
/// to [1e-3, 80].
inline DepthMetrics depth_metrics(const DepthMap<double>& pred, const DepthMap<double>& gt,
                                  const RegionMask* region = nullptr, EvalOptions opt = {}) {
  require_same_shape(pred, gt, "depth_metrics");
  if (region != nullptr) require_same_shape(pred, *region, "depth_metrics");
  std::vector<double> p, g;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    if (region != nullptr && !region->data()[i]) continue;
    if (!(gt.data()[i] > 0.0)) throw ContractError("depth_metrics: ground truth must be positive");
    if (!(pred.data()[i] > 0.0)) throw ContractError("depth_metrics: prediction must be positive");
    p.push_back(pred.data()[i]);
    g.push_back(gt.data()[i]);
  }
  if (p.empty()) throw ContractError("depth_metrics: empty region");
  if (opt.median_scale) {
    const double s = detail::median(g) / detail::median(p);
    for (double& v : p) v *= s;
  }
  DepthMetrics m;
  const double n = static_cast<double>(p.size());
  double sq = 0.0, sq_log = 0.0;
  long d1 = 0, d2 = 0, d3 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double d = p[i], t = g[i];
    if (opt.clamp) {
      d = std::clamp(d, kEvalMinDepth, kEvalMaxDepth);
      t = std::clamp(t, kEvalMinDepth, kEvalMaxDepth);
    }
    const double e = d - t;
    m.abs_rel += std::abs(e) / t;
    m.sq_rel += e * e / t;
    sq += e * e;
    const double le = std::log(d) - std::log(t);
    sq_log += le * le;
    const double ratio = std::max(d / t, t / d);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  m.abs_rel /= n;
  m.sq_rel /= n;
  m.rmse = std::sqrt(sq / n);
  m.rmse_log = std::sqrt(sq_log / n);
  m.delta1 = d1 / n;
  m.delta2 = d2 / n;
  m.delta3 = d3 / n;
  return m;
}

struct MaskScore {
  double iou = 0.0;
  /// Channels whose union achieved `iou`; one or two entries, empty if no
  /// channel overlaps.
  std::vector<int> channels;
};

/// Best IoU against `gt` over single channels and unions of two channels,
/// each binarized with value > threshold.
inline MaskScore mask_iou(const MaskStack<double>& pred, const RegionMask& gt,
                          double threshold = 0.5) {
  require_same_shape(pred, gt, "mask_iou");
  const int k = pred.channels();
  const std::size_t n = pred.pixel_count();
  std::vector<std::vector<unsigned char>> bin(static_cast<std::size_t>(k),
                                              std::vector<unsigned char>(n));
  for (int c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) bin[c][i] = pred.data()[i * k + c] > threshold;
  }
  MaskScore best;
  auto score = [&](int a, int b) {
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool p = bin[a][i] || (b >= 0 && bin[b][i]);
      const bool g = gt.data()[i] != 0;
      inter += p && g;
      uni += p || g;
    }
    const double iou = uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
    if (iou > best.iou) {
      best.iou = iou;
      best.channels = b < 0 ? std::vector<int>{a} : std::vector<int>{a, b};
    }
  };
  for (int a = 0; a < k; ++a) score(a, -1);
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) score(a, b);
  }
  return best;
}

/// Fixed-order CSV header and row.
inline std::string metrics_csv_header(const std::string& prefix = "") {
  std::string s;
  for (std::size_t i = 0; i < DepthMetrics::kColumns.size(); ++i) {
    s += (i ? "," : "") + prefix + DepthMetrics::kColumns[i];
  }
  return s;
}

inline std::string metrics_csv_row(const DepthMetrics& m) {
  std::string s;
  const auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::format_double(v[i]);
  return s;
}

}  // namespace kmotion
