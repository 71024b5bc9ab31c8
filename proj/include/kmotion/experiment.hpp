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

// Batch runner: scene x K x ordering x seed cells, each fitted, evaluated
// and written to its own directory, plus run-level summaries.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "kmotion/artifacts.hpp"
#include "kmotion/errors.hpp"
#include "kmotion/eval.hpp"
#include "kmotion/io.hpp"
#include "kmotion/optim.hpp"
#include "kmotion/synth.hpp"
#include "kmotion/version.hpp"

namespace kmotion {

struct ExperimentSpec {
  std::string name = "experiment";
  std::filesystem::path origin;              // spec file, for error messages
  std::vector<std::filesystem::path> scenes;  // resolved against the spec directory
  std::vector<int> ks;
  int steps = 2000;
  /// true = depth ordering, false = plain softmax with mask smoothing.
  std::vector<bool> ordering{true};
  bool auto_mask = false;
  std::vector<double> scales{1.0, 0.5, 0.25, 0.125};
  double lambda = 0.001;
  double mask_smooth_weight = 0.001;
  /// Multi-start overrides; unset keeps the FitConfig::desk choice for each K.
  std::optional<int> restarts, restart_steps;
  std::vector<std::uint64_t> seeds{1};
  int workers = 1;
  std::filesystem::path out;

  void validate() const {
    const std::string where = origin.empty() ? "spec" : origin.string();
    if (ks.empty()) throw ConfigError(where + ": K list is empty");
    for (int k : ks) {
      if (k < 1) throw ConfigError(where + ": K must be >= 1");
    }
    if (scenes.empty()) throw ConfigError(where + ": no scenes");
    for (const auto& s : scenes) {
      if (!std::filesystem::exists(s)) throw ConfigError(where + ": scene not found: " + s.string());
    }
    if (steps < 1) throw ConfigError(where + ": steps must be >= 1");
    if (ordering.empty()) throw ConfigError(where + ": ordering list is empty");
    if (seeds.empty()) throw ConfigError(where + ": seed list is empty");
    if (workers < 1) throw ConfigError(where + ": workers must be >= 1");
    if (restarts && *restarts < 1) throw ConfigError(where + ": restarts must be >= 1");
    if (restart_steps && *restart_steps < 1) throw ConfigError(where + ": restart_steps must be >= 1");
    LossConfig probe;
    probe.scales = scales;
    probe.lambda_base = lambda;
    probe.mask_smooth_weight = mask_smooth_weight;
    try {
      probe.validate();
    } catch (const ContractError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

  static ExperimentSpec parse(const std::string& text, const std::filesystem::path& origin) {
    const io::KeyValues kv = io::KeyValues::parse(text, origin.string());
    ExperimentSpec s;
    s.origin = origin;
    const std::filesystem::path base = origin.has_parent_path() ? origin.parent_path() : ".";
    s.name = kv.str("name", s.name);
    std::istringstream scenes(kv.str("scenes"));
    for (std::string tok; scenes >> tok;) s.scenes.push_back(base / tok);
    if (kv.has("ks")) {
      for (double k : kv.numbers("ks")) {
        if (k != std::floor(k)) throw ConfigError(origin.string() + ": ks must be integers");
        s.ks.push_back(static_cast<int>(k));
      }
    }
    s.steps = static_cast<int>(kv.integer("steps", s.steps));
    if (kv.has("ordering")) {
      s.ordering.clear();
      std::istringstream in(kv.str("ordering"));
      for (std::string tok; in >> tok;) {
        if (tok == "on") s.ordering.push_back(true);
        else if (tok == "off") s.ordering.push_back(false);
        else throw ConfigError(origin.string() + ": ordering entries are on or off, got " + tok);
      }
    }
    s.auto_mask = kv.boolean("auto_mask", s.auto_mask);
    if (kv.has("scales")) s.scales = kv.numbers("scales");
    s.lambda = kv.number("lambda", s.lambda);
    s.mask_smooth_weight = kv.number("mask_smooth_weight", s.mask_smooth_weight);
    if (kv.has("restarts")) s.restarts = static_cast<int>(kv.integer("restarts", 1));
    if (kv.has("restart_steps")) s.restart_steps = static_cast<int>(kv.integer("restart_steps", 1));
    if (kv.has("seeds")) {
      s.seeds.clear();
      for (double v : kv.numbers("seeds")) {
        if (v < 0 || v != std::floor(v)) throw ConfigError(origin.string() + ": seeds must be non-negative integers");
        s.seeds.push_back(static_cast<std::uint64_t>(v));
      }
    }
    s.workers = static_cast<int>(kv.integer("workers", s.workers));
    if (kv.has("out")) s.out = base / kv.str("out");
    return s;
  }

  static ExperimentSpec load(const std::filesystem::path& path) {
    return parse(io::read_text(path), path);
  }

  /// Resolved form, written into the run directory.
  std::string serialize() const {
    io::KeyValues kv;
    kv.set("name", name);
    std::string v;
    for (const auto& p : scenes) v += (v.empty() ? "" : " ") + p.filename().string();
    kv.set("scenes", v);
    v.clear();
    for (int k : ks) v += (v.empty() ? "" : " ") + std::to_string(k);
    kv.set("ks", v);
    kv.set("steps", std::to_string(steps));
    v.clear();
    for (bool o : ordering) v += (v.empty() ? "" : " ") + std::string(o ? "on" : "off");
    kv.set("ordering", v);
    kv.set("auto_mask", auto_mask ? "true" : "false");
    v.clear();
    for (double s : scales) v += (v.empty() ? "" : " ") + io::format_double(s);
    kv.set("scales", v);
    kv.set("lambda", io::format_double(lambda));
    kv.set("mask_smooth_weight", io::format_double(mask_smooth_weight));
    if (restarts) kv.set("restarts", std::to_string(*restarts));
    if (restart_steps) kv.set("restart_steps", std::to_string(*restart_steps));
    v.clear();
    for (auto s : seeds) v += (v.empty() ? "" : " ") + std::to_string(s);
    kv.set("seeds", v);
    return kv.serialize();
  }
};

/// KMOTION_SEED replaces the seed list; KMOTION_WORKERS the worker count.
inline void apply_env_overrides(ExperimentSpec& spec) {
  if (const char* s = std::getenv("KMOTION_SEED")) {
    try {
      spec.seeds = {static_cast<std::uint64_t>(std::stoull(s))};
    } catch (const std::exception&) {
      throw ConfigError(std::string("KMOTION_SEED: not an integer: ") + s);
    }
  }
  if (const char* w = std::getenv("KMOTION_WORKERS")) {
    try {
      spec.workers = std::stoi(w);
    } catch (const std::exception&) {
      throw ConfigError(std::string("KMOTION_WORKERS: not an integer: ") + w);
    }
  }
}

struct Cell {
  std::string id;
  std::filesystem::path scene;
  std::string scene_name;
  int k = 1;
  bool ordering = true;
  std::uint64_t seed = 1;
};

inline std::vector<Cell> plan_cells(const ExperimentSpec& spec) {
  std::vector<Cell> cells;
  for (const auto& scene : spec.scenes) {
    const std::string name = scene.stem().string();
    for (int k : spec.ks) {
      for (bool ord : spec.ordering) {
        for (auto seed : spec.seeds) {
          Cell c{name + "-k" + std::to_string(k) + (ord ? "-ordering" : "-mask-smoothing") + "-s" +
                     std::to_string(seed),
                 scene, name, k, ord, seed};
          cells.push_back(c);
        }
      }
    }
  }
  return cells;
}

/// Fit settings for one cell.
inline FitConfig cell_fit_config(const ExperimentSpec& spec, const Cell& cell) {
  FitConfig fc = FitConfig::desk(cell.k, spec.steps, cell.seed);
  if (!cell.ordering) fc.loss = LossConfig::mask_smoothing_baseline();
  fc.loss.scales = spec.scales;
  fc.loss.lambda_base = spec.lambda;
  fc.loss.mask_smooth_weight = spec.mask_smooth_weight;
  fc.loss.auto_mask = spec.auto_mask;
  if (spec.restarts) fc.restarts = *spec.restarts;
  if (spec.restart_steps) fc.restart_steps = *spec.restart_steps;
  return fc;
}

struct CellResult {
  Cell cell;
  bool ok = false;
  std::string error;
  std::optional<DepthMetrics> depth;
  std::optional<DepthMetrics> moving;
  std::optional<double> mask_iou;
  double final_loss = 0.0;
};

inline nlohmann::ordered_json metrics_json(const DepthMetrics& m) {
  nlohmann::ordered_json j;
  const auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i) j[DepthMetrics::kColumns[i]] = v[i];
  return j;
}

inline nlohmann::ordered_json cell_json(const CellResult& r) {
  nlohmann::ordered_json j;
  j["cell"] = r.cell.id;
  j["scene"] = r.cell.scene_name;
  j["k"] = r.cell.k;
  j["ordering"] = r.cell.ordering;
  j["seed"] = r.cell.seed;
  j["status"] = r.ok ? "ok" : "failed";
  if (!r.ok) j["error"] = r.error;
  j["depth"] = r.depth ? metrics_json(*r.depth) : nlohmann::ordered_json();
  j["moving"] = r.moving ? metrics_json(*r.moving) : nlohmann::ordered_json();
  j["mask_iou"] = r.mask_iou ? nlohmann::ordered_json(*r.mask_iou) : nlohmann::ordered_json();
  j["final_loss"] = r.ok ? nlohmann::ordered_json(r.final_loss) : nlohmann::ordered_json();
  return j;
}

/// Fits and evaluates one cell, writing its artifacts under `dir`. Never
/// throws: failures come back in the result.
inline CellResult run_cell(const ExperimentSpec& spec, const Cell& cell, const std::filesystem::path& dir) {
  CellResult r{cell};
  try {
    const SyntheticScene sc = generate_scene(load_scene_config(cell.scene));
    std::filesystem::create_directories(dir);
    std::ostringstream log;
    const FitResult fr = fit_scene(sc, cell_fit_config(spec, cell), {&log});
    io::write_text(dir / "loss.jsonl", log.str());
    write_fit_artifacts(dir, fr.depth, fr.masks, fr.poses);
    io::write_pnm(dir / "masks.ppm", mask_composite(fr.masks));
    r.final_loss = fr.loss_history.back().total;
    if (!std::isfinite(r.final_loss)) throw OptimizationError("final loss is not finite");
    r.depth = depth_metrics(fr.depth, sc.depth);
    const BoolMap moving = sc.moving_region();
    if (std::find(moving.data().begin(), moving.data().end(), 1) != moving.data().end()) {
      r.moving = depth_metrics(fr.depth, sc.depth, &moving);
      if (cell.k > 1) r.mask_iou = mask_iou(fr.masks, moving).iou;
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  try {
    std::filesystem::create_directories(dir);
    io::write_text(dir / "metrics.json", cell_json(r).dump(2) + "\n");
  } catch (const std::exception& e) {
    if (r.ok) r.error = e.what();
    r.ok = false;
  }
  return r;
}

inline std::string summary_csv(const std::vector<CellResult>& results) {
  std::string s = "cell,scene,k,ordering,seed,status," + metrics_csv_header() + "," +
                  metrics_csv_header("moving_") + ",mask_iou,final_loss\n";
  const std::string blank7 = ",,,,,,";
  for (const auto& r : results) {
    s += r.cell.id + "," + r.cell.scene_name + "," + std::to_string(r.cell.k) + "," +
         (r.cell.ordering ? "on" : "off") + "," + std::to_string(r.cell.seed) + "," +
         (r.ok ? "ok" : "failed") + ",";
    s += (r.depth ? metrics_csv_row(*r.depth) : blank7) + ",";
    s += (r.moving ? metrics_csv_row(*r.moving) : blank7) + ",";
    s += (r.mask_iou ? io::format_double(*r.mask_iou) : "") + ",";
    s += r.ok ? io::format_double(r.final_loss) : "";
    s += "\n";
  }
  return s;
}

struct RunReport {
  std::vector<CellResult> cells;
  bool ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
  }
};

/// Runs every cell on `spec.workers` threads. Outputs depend only on the
/// spec, never on scheduling. `progress`, when set, receives one line per
/// finished cell.
inline RunReport run_experiment(const ExperimentSpec& spec, std::ostream* progress = nullptr) {
  spec.validate();
  if (spec.out.empty()) throw ConfigError("run: no output directory");
  const std::vector<Cell> cells = plan_cells(spec);
  std::filesystem::create_directories(spec.out / "cells");
  io::write_text(spec.out / "spec.txt", spec.serialize());
  nlohmann::ordered_json run;
  run["name"] = spec.name;
  run["version"] = kVersion;
  run["seeds"] = spec.seeds;
  run["steps"] = spec.steps;
  run["cells"] = cells.size();
  io::write_text(spec.out / "run.json", run.dump(2) + "\n");

  RunReport report;
  report.cells.resize(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex print;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      report.cells[i] = run_cell(spec, cells[i], spec.out / "cells" / cells[i].id);
      if (progress != nullptr) {
        std::lock_guard lock(print);
        const auto& r = report.cells[i];
        *progress << "cell " << r.cell.id << " " << (r.ok ? "ok" : "failed: " + r.error) << "\n";
      }
    }
  };
  const int n = std::min<int>(spec.workers, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  io::write_text(spec.out / "summary.csv", summary_csv(report.cells));
  nlohmann::ordered_json summary;
  summary["name"] = spec.name;
  summary["cells"] = nlohmann::ordered_json::array();
  for (const auto& r : report.cells) summary["cells"].push_back(cell_json(r));
  io::write_text(spec.out / "summary.json", summary.dump(2) + "\n");
  return report;
}

}  // namespace kmotion
