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

// Fixture manifests. Each MANIFEST line is
//   <relative path> <fnv1a of the file bytes> [<scene checksum>]
// where the optional scene checksum covers the rendered scene, so a change
// in the generator shows up even when the config file is untouched.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "kmotion/errors.hpp"
#include "kmotion/io.hpp"
#include "kmotion/synth.hpp"

namespace kmotion {

inline std::string manifest_line(const std::filesystem::path& dir, const std::string& rel) {
  const std::string bytes = io::read_text(dir / rel);
  std::string line = rel + " " + io::hex64(io::fnv1a(bytes));
  if (std::filesystem::path(rel).extension() == ".scene") {
    line += " " + io::hex64(scene_checksum(generate_scene(load_scene_config(dir / rel))));
  }
  return line;
}

/// Rebuilds MANIFEST text for `files` (paths relative to `dir`).
inline std::string build_manifest(const std::filesystem::path& dir, const std::vector<std::string>& files) {
  std::string out;
  for (const auto& f : files) out += manifest_line(dir, f) + "\n";
  return out;
}

/// Problems found checking `dir`/MANIFEST; empty when every entry matches.
inline std::vector<std::string> verify_fixtures(const std::filesystem::path& dir) {
  std::vector<std::string> problems;
  std::string text;
  try {
    text = io::read_text(dir / "MANIFEST");
  } catch (const std::exception& e) {
    return {std::string("MANIFEST unreadable: ") + e.what()};
  }
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string rel, bytes, scene;
    fields >> rel >> bytes >> scene;
    if (rel.empty() || bytes.empty()) {
      problems.push_back("MANIFEST:" + std::to_string(lineno) + ": malformed entry");
      continue;
    }
    try {
      std::istringstream actual(manifest_line(dir, rel));
      std::string arel, abytes, ascene;
      actual >> arel >> abytes >> ascene;
      if (abytes != bytes) {
        problems.push_back(rel + ": checksum mismatch (expected " + bytes + ", got " + abytes + ")");
      } else if (scene != ascene) {
        problems.push_back(rel + ": rendered scene checksum mismatch (expected " + scene + ", got " +
                           ascene + ")");
      }
    } catch (const std::exception& e) {
      problems.push_back(rel + ": " + e.what());
    }
  }
  return problems;
}

}  // namespace kmotion
