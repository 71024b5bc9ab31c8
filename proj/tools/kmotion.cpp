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


// kmotion: batch experiments, the invariant suite and mask rendering.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kmotion/artifacts.hpp"
#include "kmotion/experiment.hpp"
#include "kmotion/fixtures.hpp"
#include "kmotion/selfcheck.hpp"
#include "kmotion/synth.hpp"

namespace {

int run_command(const std::string& spec_path, const std::string& out, int workers, bool dry_run) {
  kmotion::ExperimentSpec spec = kmotion::ExperimentSpec::load(spec_path);
  if (workers > 0) spec.workers = workers;
  kmotion::apply_env_overrides(spec);
  if (!out.empty()) spec.out = out;
  spec.validate();
  if (dry_run) {
    for (const auto& c : kmotion::plan_cells(spec)) {
      std::cout << "cell " << c.id << " scene=" << c.scene.string() << " k=" << c.k
                << " ordering=" << (c.ordering ? "on" : "off") << " seed=" << c.seed
                << " steps=" << spec.steps << "\n";
    }
    return 0;
  }
  const auto report = kmotion::run_experiment(spec, &std::cout);
  std::size_t failed = 0;
  for (const auto& c : report.cells) failed += !c.ok;
  std::cout << report.cells.size() - failed << "/" << report.cells.size() << " cells ok; results in "
            << spec.out.string() << "\n";
  return failed == 0 ? 0 : 1;
}

int selfcheck_command(const std::string& fixtures, const std::string& flip,
                      const std::vector<std::string>& groups) {
  kmotion::selfcheck::Options opt;
  opt.fixtures = fixtures;
  if (!flip.empty()) {
    bool found = false;
    for (int i = 0; i <= static_cast<int>(kmotion::diff::Op::Custom); ++i) {
      const auto op = static_cast<kmotion::diff::Op>(i);
      if (flip == kmotion::diff::op_name(op)) {
        opt.flip = op;
        found = true;
      }
    }
    if (!found) throw kmotion::ConfigError("--flip-sign: unknown op " + flip);
  }
  std::vector<std::string> failed;
  for (const auto& g : kmotion::selfcheck::run(opt, groups)) {
    char took[32];
    std::snprintf(took, sizeof took, "%.2f", g.seconds);
    std::cout << (g.ok ? "PASS " : "FAIL ") << g.name << ": " << g.detail << " [" << took << " s]\n";
    if (!g.ok) failed.push_back(g.name);
  }
  if (failed.empty()) return 0;
  std::cout << "failed groups:";
  for (const auto& f : failed) std::cout << " " << f;
  std::cout << "\n";
  return 1;
}

int render_masks_command(const std::string& fit_dir, const std::string& out) {
  const auto masks = kmotion::read_mask_bundle(std::filesystem::path(fit_dir) / "masks.pgm");
  kmotion::io::write_pnm(out, kmotion::mask_composite(masks));
  return 0;
}

int export_command(const std::string& config, const std::string& out) {
  kmotion::export_scene(kmotion::generate_scene(kmotion::load_scene_config(config)), out);
  return 0;
}

int manifest_command(const std::string& dir, const std::vector<std::string>& files) {
  kmotion::io::write_text(std::filesystem::path(dir) / "MANIFEST", kmotion::build_manifest(dir, files));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kmotion: depth and K-component rigid motion fitting on synthetic scenes"};
  app.require_subcommand(1);

  std::string spec, out;
  int workers = 0;
  bool dry_run = false;
  auto* run = app.add_subcommand("run", "Run every cell of an experiment spec");
  run->add_option("--spec", spec, "Experiment spec file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (overrides the spec)");
  run->add_option("--workers", workers, "Parallel fits")->check(CLI::PositiveNumber);
  run->add_flag("--dry-run", dry_run, "Print planned cells and exit");

  std::string fixtures, flip;
  std::vector<std::string> groups;
  auto* check = app.add_subcommand("selfcheck", "Run the invariant suite");
  check->add_option("--fixtures", fixtures, "Fixture directory with a MANIFEST");
  check->add_option("--flip-sign", flip, "Negate the derivative of one tape op (mutation test)");
  check->add_option("--group", groups, "Only run these groups");

  std::string fit_dir, masks_out;
  auto* render = app.add_subcommand("render-masks", "Render a fit's masks as a color composite");
  render->add_option("--fit", fit_dir, "Fit artifact directory")->required()->check(CLI::ExistingDirectory);
  render->add_option("--out", masks_out, "Output PPM")->required();

  std::string scene_cfg, scene_out;
  auto* exp = app.add_subcommand("export-scene", "Render a scene config to frames, depth and masks");
  exp->add_option("--config", scene_cfg, "Scene config")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", scene_out, "Output directory")->required();

  std::string manifest_dir;
  std::vector<std::string> manifest_files;
  auto* man = app.add_subcommand("manifest", "Write MANIFEST checksums for fixture files");
  man->add_option("--dir", manifest_dir, "Fixture directory")->required()->check(CLI::ExistingDirectory);
  man->add_option("files", manifest_files, "Files relative to --dir")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(spec, out, workers, dry_run);
    if (*check) return selfcheck_command(fixtures, flip, groups);
    if (*render) return render_masks_command(fit_dir, masks_out);
    if (*exp) return export_command(scene_cfg, scene_out);
    if (*man) return manifest_command(manifest_dir, manifest_files);
  } catch (const std::exception& e) {
    std::cerr << "kmotion: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
