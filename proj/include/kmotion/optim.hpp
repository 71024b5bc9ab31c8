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

// Adam and direct-variable fitting of depth, masks and poses to one triplet.
//
// Optimized variables:
//   log-depth     w*h            depth = exp(log-depth)
//   mask logits   w*h*K          masks = softmax(d_i * logit_i), K > 1 only
//   raw poses     S*K*6          decode_pose (x0.01) per source view S
// Masks are shared between the source views; each source has its own
// TransformSet.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <utility>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kmotion/artifacts.hpp"
#include "kmotion/decomposition.hpp"
#include "kmotion/diff.hpp"
#include "kmotion/errors.hpp"
#include "kmotion/geometry.hpp"
#include "kmotion/losses.hpp"
#include "kmotion/random.hpp"
#include "kmotion/synth.hpp"
#include "kmotion/warp.hpp"

namespace kmotion {

struct AdamState {
  std::vector<double> m, v;
  long step_count = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st,
                      const std::string& block = "params") {
  if (params.size() != grads.size()) {
    throw ContractError("adam_step: " + block + ": " + std::to_string(params.size()) +
                        " parameters but " + std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw OptimizationError("adam_step: non-finite gradient in block " + block + " at index " +
                              std::to_string(i));
    }
  }
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size() || st.v.size() != params.size()) {
    throw ContractError("adam_step: " + block + ": state size mismatch");
  }
  ++st.step_count;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
  }
}

/// Piecewise-constant learning rate: `initial` until `drop_at` of the run,
/// `final_lr` afterwards.
struct LrSchedule {
  double initial = 1e-4;
  double final_lr = 1e-5;
  double drop_at = 0.75;

  double at(int step, int steps) const {
    return static_cast<double>(step) < drop_at * steps ? initial : final_lr;
  }
};

/// Learning-rate multipliers per parameter block.
struct BlockGains {
  double log_depth = 1.0;
  double logits = 1.0;
  double rotation = 1.0;     // first half of each raw pose
  double translation = 1.0;  // second half
};

struct FitInit {
  double depth = 5.0;  // constant initial depth
  /// Per-pixel starting depth; overrides `depth` when non-empty.
  DepthMap<double> depth_map;
  /// Starting poses per source view (K-independent: every component starts
  /// from the same transform plus noise). Empty means identity.
  std::vector<RigidTransform<double>> poses;
  double rotation_noise = 0.0;     // radians, exact norm, random direction
  double translation_noise = 0.0;  // scene units, exact norm
  double logit_noise = 0.0;        // uniform in [-a, a]
};

struct FitConfig {
  int k = 1;
  int steps = 500;
  LrSchedule lr;
  BlockGains gains;
  LossConfig loss;
  FitInit init;
  /// Cell sizes (pixels) of the mask-logit pyramid. The logit at a pixel is
  /// the sum of every level, bilinearly upsampled; {1} is a plain per-pixel
  /// field.
  std::vector<int> mask_levels{1};
  /// Multi-start: trajectories probed for `restart_steps` before keeping the
  /// lowest-loss one. 1 disables probing.
  int restarts = 1;
  int restart_steps = 300;
  std::uint64_t seed = 0;

  /// Settings used for desk-scale fits: the fixed step size of the default
  /// schedule is scaled per block so free variables move within a few
  /// hundred steps, components start from distinct noisy poses, masks use a
  /// three-level logit pyramid, and four starts are probed for 400 steps.
  /// The multi-start applies to every K so step budgets stay equal.
  static FitConfig desk(int k, int steps, std::uint64_t seed) {
    FitConfig c;
    c.k = k;
    c.steps = steps;
    c.seed = seed;
    c.gains = {200.0, 500.0, 300.0, 5000.0};
    c.loss.scales = {1.0, 0.5, 0.25, 0.125};
    c.init.rotation_noise = 0.002;
    c.init.translation_noise = 0.05;
    c.init.logit_noise = 1.0;
    c.mask_levels = {1, 4, 16};
    c.restarts = 4;
    c.restart_steps = 400;
    return c;
  }

  void validate() const {
    if (k < 1) throw ContractError("fit: K must be >= 1");
    if (steps < 1) throw ContractError("fit: steps must be >= 1");
    if (!(lr.initial > 0.0) || !(lr.final_lr > 0.0)) throw ContractError("fit: lr must be positive");
    if (!(init.depth > 0.0)) throw ContractError("fit: initial depth must be positive");
    if (restarts < 1) throw ContractError("fit: restarts must be >= 1");
    if (restarts > 1 && restart_steps < 1) throw ContractError("fit: restart_steps must be >= 1");
    if (mask_levels.empty()) throw ContractError("fit: at least one mask level required");
    for (int c : mask_levels) {
      if (c < 1) throw ContractError("fit: mask level cells must be >= 1");
    }
    loss.validate();
  }
};

struct FitResult {
  DepthMap<double> depth;
  MaskStack<double> masks;
  std::vector<TransformSet<double>> poses;
  std::vector<LossBreakdown> loss_history;
  double wall_time = 0.0;  // seconds
};

/// Per-step hooks for logging and checkpoints.
struct FitObserver {
  std::ostream* log = nullptr;  // one LossBreakdown JSON object per line
  std::filesystem::path checkpoint_dir;
  int checkpoint_every = 0;
};

namespace detail {

/// One level of the mask-logit pyramid: a (gw x gh x K) grid with `cell`
/// pixel spacing, stored at `offset` in the flat logit vector.
struct LogitLevel {
  int cell, gw, gh;
  std::size_t offset;
  std::size_t size(int k) const { return static_cast<std::size_t>(gw) * gh * k; }
};

inline std::vector<LogitLevel> logit_levels(int w, int h, int k, std::vector<int> cells) {
  std::sort(cells.begin(), cells.end());
  std::vector<LogitLevel> out;
  std::size_t offset = 0;
  for (int c : cells) {
    LogitLevel l{c, c == 1 ? w : (w - 1) / c + 2, c == 1 ? h : (h - 1) / c + 2, offset};
    offset += l.size(k);
    out.push_back(l);
  }
  return out;
}

struct FitVariables {
  int w, h, k, sources;
  std::vector<double> log_depth, logits, pose;
  std::vector<LogitLevel> levels;

  std::array<double, 6> raw_pose(int s, int c) const {
    std::array<double, 6> r;
    std::copy_n(pose.begin() + (static_cast<std::size_t>(s) * k + c) * 6, 6, r.begin());
    return r;
  }
};

inline FitVariables init_variables(int w, int h, int sources, const FitConfig& cfg) {
  FitVariables v{w, h, cfg.k, sources, {}, {}, {}, {}};
  Rng rng(cfg.seed);
  v.log_depth.assign(static_cast<std::size_t>(w) * h, std::log(cfg.init.depth));
  if (!cfg.init.depth_map.data().empty()) {
    if (!cfg.init.depth_map.same_shape(w, h)) throw ContractError("fit: initial depth map shape");
    for (std::size_t i = 0; i < v.log_depth.size(); ++i) {
      v.log_depth[i] = std::log(cfg.init.depth_map.data()[i]);
    }
  }
  if (cfg.k > 1) {
    v.levels = detail::logit_levels(w, h, cfg.k, cfg.mask_levels);
    v.logits.assign(v.levels.back().offset + v.levels.back().size(cfg.k), 0.0);
    // Noise goes into the finest level only.
    const LogitLevel& fine = v.levels.front();
    for (std::size_t i = 0; i < fine.size(cfg.k); ++i) {
      v.logits[fine.offset + i] = rng.uniform(-cfg.init.logit_noise, cfg.init.logit_noise);
    }
  }
  for (int s = 0; s < sources; ++s) {
    const RigidTransform<double> base =
        cfg.init.poses.empty() ? RigidTransform<double>{} : cfg.init.poses.at(s);
    for (int c = 0; c < cfg.k; ++c) {
      RigidTransform<double> tf = base;
      const auto dr = rng.on_sphere(cfg.init.rotation_noise);
      const auto dt = rng.on_sphere(cfg.init.translation_noise);
      for (int i = 0; i < 3; ++i) {
        tf.axis_angle[i] += dr[i];
        tf.translation[i] += dt[i];
      }
      const auto raw = encode_pose(tf);
      v.pose.insert(v.pose.end(), raw.begin(), raw.end());
    }
  }
  return v;
}

template <class T>
Prediction<T> build_prediction(const FitVariables& v, std::span<const T> ld,
                               std::span<const T> logits, std::span<const T> pose,
                               const LossConfig& loss) {
  Prediction<T> p;
  p.depth = DepthMap<T>(v.w, v.h, 1);
  for (std::size_t i = 0; i < ld.size(); ++i) p.depth.data()[i] = diff::exp(ld[i]);
  if (v.k == 1) {
    p.masks = MaskStack<T>(v.w, v.h, 1, T(1.0));
  } else {
    MaskLogits<T> l(v.w, v.h, v.k);
    std::vector<T> terms;
    std::vector<double> weights;
    for (int y = 0; y < v.h; ++y) {
      for (int x = 0; x < v.w; ++x) {
        for (int c = 0; c < v.k; ++c) {
          terms.clear();
          weights.clear();
          for (const LogitLevel& lv : v.levels) {
            auto at = [&](int gx, int gy) { return logits[lv.offset + (static_cast<std::size_t>(gy) * lv.gw + gx) * v.k + c]; };
            if (lv.cell == 1) {
              terms.push_back(at(x, y));
              weights.push_back(1.0);
              continue;
            }
            const int gx = x / lv.cell, gy = y / lv.cell;
            const double fx = static_cast<double>(x % lv.cell) / lv.cell;
            const double fy = static_cast<double>(y % lv.cell) / lv.cell;
            terms.insert(terms.end(), {at(gx, gy), at(gx + 1, gy), at(gx, gy + 1), at(gx + 1, gy + 1)});
            weights.insert(weights.end(), {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy});
          }
          l(x, y, c) = terms.size() == 1 ? terms[0]
                                         : diff::weighted_sum(std::span<const T>(terms), std::span<const double>(weights));
        }
      }
    }
    p.masks = normalize_masks(l, loss.use_depth_ordering ? OrderingWeights::ordered(v.k)
                                                         : OrderingWeights::flat(v.k));
  }
  for (int s = 0; s < v.sources; ++s) {
    TransformSet<T> ts;
    for (int c = 0; c < v.k; ++c) {
      std::array<T, 6> raw;
      std::copy_n(pose.begin() + (static_cast<std::size_t>(s) * v.k + c) * 6, 6, raw.begin());
      ts.push_back(decode_pose(raw));
    }
    p.poses.push_back(ts);
  }
  return p;
}

inline Prediction<double> values_prediction(const FitVariables& v, const LossConfig& loss) {
  return build_prediction<double>(v, v.log_depth, v.logits, v.pose, loss);
}

}  // namespace detail

namespace detail {

/// One optimization trajectory: variables, optimizer state and loss history.
class FitRun {
 public:
  FitRun(const Observation& obs, const FitConfig& cfg, std::uint64_t seed)
      : obs_(obs), cfg_(cfg) {
    FitConfig seeded = cfg;
    seeded.seed = seed;
    v_ = init_variables(obs.target.width(), obs.target.height(),
                        static_cast<int>(obs.sources.size()), seeded);
    history_.reserve(static_cast<std::size_t>(cfg.steps));
  }

  int steps_done() const { return static_cast<int>(history_.size()); }
  const std::vector<LossBreakdown>& history() const { return history_; }
  Prediction<double> values() const { return values_prediction(v_, cfg_.loss); }

  void step() {
    const int step = steps_done();
    tape_.clear();
    std::vector<double> adj;
    LossBreakdown bd;
    {
      diff::TapeScope scope(tape_);
      auto lift_all = [&](const std::vector<double>& src, std::vector<diff::Var>& dst) {
        dst.clear();
        for (double x : src) dst.push_back(tape_.input(x));
      };
      lift_all(v_.log_depth, in_depth_);
      lift_all(v_.logits, in_logits_);
      lift_all(v_.pose, in_pose_);
      const Prediction<diff::Var> pred =
          build_prediction<diff::Var>(v_, in_depth_, in_logits_, in_pose_, cfg_.loss);
      const LossEvaluation<diff::Var> ev = total_loss(obs_, pred, cfg_.loss);
      bd = ev.breakdown;
      adj = tape_.adjoints(ev.total);
    }
    history_.push_back(bd);

    auto grads_of = [&](const std::vector<diff::Var>& vars) {
      std::vector<double> g(vars.size());
      for (std::size_t i = 0; i < vars.size(); ++i) g[i] = adj[vars[i].id()];
      return g;
    };
    const double lr = cfg_.lr.at(step, cfg_.steps);
    st_depth_.lr = lr * cfg_.gains.log_depth;
    st_logits_.lr = lr * cfg_.gains.logits;
    st_rot_.lr = lr * cfg_.gains.rotation;
    st_trans_.lr = lr * cfg_.gains.translation;
    adam_step(v_.log_depth, grads_of(in_depth_), st_depth_, "log-depth");
    if (!v_.logits.empty()) adam_step(v_.logits, grads_of(in_logits_), st_logits_, "mask-logits");
    const std::vector<double> gp = grads_of(in_pose_);
    std::vector<double> rot, trans, grot, gtrans;
    for (std::size_t i = 0; i < gp.size(); ++i) {
      const bool is_rot = i % 6 < 3;
      (is_rot ? rot : trans).push_back(v_.pose[i]);
      (is_rot ? grot : gtrans).push_back(gp[i]);
    }
    adam_step(rot, grot, st_rot_, "pose-rotation");
    adam_step(trans, gtrans, st_trans_, "pose-translation");
    for (std::size_t i = 0; i < gp.size(); ++i) {
      v_.pose[i] = i % 6 < 3 ? rot[(i / 6) * 3 + i % 6] : trans[(i / 6) * 3 + i % 6 - 3];
    }
  }

 private:
  const Observation& obs_;
  const FitConfig& cfg_;
  FitVariables v_;
  AdamState st_depth_, st_logits_, st_rot_, st_trans_;
  std::vector<LossBreakdown> history_;
  diff::Tape tape_;
  std::vector<diff::Var> in_depth_, in_logits_, in_pose_;
};

inline std::uint64_t restart_seed(std::uint64_t seed, int r) {
  return r == 0 ? seed : seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(r);
}

}  // namespace detail

/// Fits depth, masks and poses to `obs` by full-batch Adam on the total loss.
///
/// With cfg.restarts > 1, that many trajectories are started from different
/// seeds and run for cfg.restart_steps; the one with the lowest total loss is
/// continued to cfg.steps. The observer sees the kept trajectory only; its
/// log lines and checkpoints for the probe phase are written once the choice
/// is made.
inline FitResult fit(const Observation& obs, const FitConfig& cfg, const FitObserver& observer = {}) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (obs.sources.empty()) throw ContractError("fit: no source views");
  if (!cfg.init.poses.empty() && cfg.init.poses.size() != obs.sources.size()) {
    throw ContractError("fit: need one initial pose per source view");
  }
  const bool checkpoints = observer.checkpoint_every > 0;
  auto due = [&](const detail::FitRun& run) {
    return checkpoints && run.steps_done() % observer.checkpoint_every == 0;
  };
  auto write_checkpoint = [&](int done, const Prediction<double>& p) {
    write_fit_artifacts(observer.checkpoint_dir / ("step-" + std::to_string(done)), p.depth, p.masks,
                        p.poses);
  };

  std::optional<detail::FitRun> kept;
  if (cfg.restarts > 1) {
    // Probe checkpoints are held in memory until the kept run is known.
    using Snapshots = std::vector<std::pair<int, Prediction<double>>>;
    const int probe = std::min(cfg.restart_steps, cfg.steps);
    double best = 0.0;
    Snapshots kept_snaps;
    for (int r = 0; r < cfg.restarts; ++r) {
      detail::FitRun run(obs, cfg, detail::restart_seed(cfg.seed, r));
      Snapshots snaps;
      while (run.steps_done() < probe) {
        run.step();
        if (due(run)) snaps.emplace_back(run.steps_done(), run.values());
      }
      const double loss = run.history().back().total;
      if (!kept || loss < best) {
        best = loss;
        kept.emplace(std::move(run));
        kept_snaps = std::move(snaps);
      }
    }
    if (observer.log != nullptr) {
      for (int i = 0; i < kept->steps_done(); ++i) {
        *observer.log << loss_breakdown_json(kept->history()[i], i) << "\n";
      }
    }
    for (const auto& [done, p] : kept_snaps) write_checkpoint(done, p);
  } else {
    kept.emplace(obs, cfg, cfg.seed);
  }
  detail::FitRun& run = *kept;
  while (run.steps_done() < cfg.steps) {
    run.step();
    if (observer.log != nullptr) {
      *observer.log << loss_breakdown_json(run.history().back(), run.steps_done() - 1) << "\n";
    }
    if (due(run)) write_checkpoint(run.steps_done(), run.values());
  }

  FitResult result;
  const Prediction<double> p = run.values();
  result.depth = p.depth;
  result.masks = p.masks;
  result.poses = p.poses;
  result.loss_history = run.history();
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline FitResult fit_scene(const SyntheticScene& scene, const FitConfig& cfg,
                           const FitObserver& observer = {}) {
  return fit(scene.observation(), cfg, observer);
}

/// Per-pixel displacement (du, dv) induced by a model, plus which pixels land
/// inside the source view.
struct Flow {
  Raster<double> uv;
  BoolMap valid;
};

inline Flow induced_flow(const DepthMap<double>& depth, const MaskStack<double>& masks,
                         const TransformSet<double>& ts, const CameraIntrinsics& intr) {
  const WarpCoordinates<double> wc = warp_coordinates(depth, masks, ts, intr);
  const int w = depth.width(), h = depth.height();
  Flow f{Raster<double>(w, h, 2), BoolMap(w, h, 1, 0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const PixelCoord<double>& q = wc.coords(x, y);
      f.uv(x, y, 0) = q.u - x;
      f.uv(x, y, 1) = q.v - y;
      f.valid(x, y) = wc.in_front(x, y) == PixelState::Valid && q.u >= 0 && q.u <= w - 1 &&
                      q.v >= 0 && q.v <= h - 1;
    }
  }
  return f;
}

/// Moving average over `window` steps of the total loss.
inline std::vector<double> smoothed_loss(const std::vector<LossBreakdown>& history, int window) {
  std::vector<double> out;
  double acc = 0.0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    acc += history[i].total;
    if (i >= static_cast<std::size_t>(window)) acc -= history[i - window].total;
    if (i + 1 >= static_cast<std::size_t>(window)) out.push_back(acc / window);
  }
  return out;
}

}  // namespace kmotion
