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

// File formats: flat key-value configs, Netpbm (P5/P6, 8-bit), PFM (32-bit
// float, little-endian, bottom-to-top rows), and a 64-bit FNV-1a checksum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kmotion/errors.hpp"
#include "kmotion/image.hpp"

namespace kmotion::io {

// ---------------------------------------------------------------------------
// Checksums

inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ull) {
  return fnv1a(s.data(), s.size(), h);
}

/// Checksum of the exact bit patterns of a raster's values and its shape.
inline std::uint64_t checksum(const Raster<double>& r,
                              std::uint64_t h = 14695981039346656037ull) {
  const std::int32_t dims[3] = {r.width(), r.height(), r.channels()};
  h = fnv1a(dims, sizeof dims, h);
  return fnv1a(r.data().data(), r.data().size() * sizeof(double), h);
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Text files

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  for (int p = 1; p < 17; ++p) {
    std::ostringstream t;
    t << std::setprecision(p) << v;
    if (std::stod(t.str()) == v) return t.str();
  }
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Flat `key = value` file. '#' starts a comment; keys keep file order.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<text>") {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (kv.values_.count(key)) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
      }
      kv.order_.push_back(key);
      kv.values_[key] = value;
    }
    kv.origin_ = origin;
    return kv;
  }

  static KeyValues load(const std::filesystem::path& path) {
    return parse(read_text(path), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing key " + key);
    return it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  double number(const std::string& key) const {
    const auto v = numbers(key);
    if (v.size() != 1) throw ConfigError(origin_ + ": key " + key + " expects one number");
    return v[0];
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  long integer(const std::string& key) const {
    const double d = number(key);
    if (d != std::floor(d)) throw ConfigError(origin_ + ": key " + key + " expects an integer");
    return static_cast<long>(d);
  }
  long integer(const std::string& key, long fallback) const {
    return has(key) ? integer(key) : fallback;
  }
  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = str(key);
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw ConfigError(origin_ + ": key " + key + " expects a boolean");
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    std::istringstream in(replace_commas(str(key)));
    std::string tok;
    while (in >> tok) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError(origin_ + ": key " + key + ": not a number: " + tok);
      }
    }
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
  }

  const std::vector<std::string>& keys() const { return order_; }

  std::string serialize() const {
    std::ostringstream os;
    for (const auto& k : order_) os << k << " = " << values_.at(k) << "\n";
    return os.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static std::string replace_commas(std::string s) {
    std::replace(s.begin(), s.end(), ',', ' ');
    return s;
  }

  std::vector<std::string> order_;
  std::map<std::string, std::string> values_;
  std::string origin_ = "<text>";
};

// ---------------------------------------------------------------------------
// Netpbm

inline unsigned char to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

inline void write_pnm(std::ostream& out, const Image<double>& img) {
  const bool color = img.channels() == 3;
  if (img.channels() != 1 && !color) throw ContractError("pnm: need 1 or 3 channels");
  out << (color ? "P6\n" : "P5\n") << img.width() << " " << img.height() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) bytes[i] = to_byte(img.data()[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline void write_pnm(const std::filesystem::path& path, const Image<double>& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_pnm(out, img);
}

namespace detail {
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}
}  // namespace detail

/// Reads one P5/P6 image from the stream (multi-image streams are supported
/// by calling repeatedly). Returns false at end of stream.
inline bool read_pnm(std::istream& in, Image<double>& img) {
  const std::string magic = detail::pnm_token(in);
  if (magic.empty()) return false;
  if (magic != "P5" && magic != "P6") throw IoError("pnm: unsupported magic " + magic);
  const int w = std::stoi(detail::pnm_token(in));
  const int h = std::stoi(detail::pnm_token(in));
  const int maxval = std::stoi(detail::pnm_token(in));
  if (maxval != 255) throw IoError("pnm: only 8-bit images are supported");
  const int nc = magic == "P6" ? 3 : 1;
  img = Image<double>(w, h, nc);
  std::vector<unsigned char> bytes(img.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError("pnm: truncated");
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data()[i] = bytes[i] / 255.0;
  return true;
}

inline Image<double> read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Image<double> img;
  if (!read_pnm(in, img)) throw IoError("empty image file " + path.string());
  return img;
}

// ---------------------------------------------------------------------------
// PFM

inline void write_pfm(const std::filesystem::path& path, const Raster<double>& img) {
  if (img.channels() != 1 && img.channels() != 3) throw ContractError("pfm: need 1 or 3 channels");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (img.channels() == 3 ? "PF\n" : "Pf\n") << img.width() << " " << img.height()
      << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(img.width()) * img.channels());
  for (int y = img.height() - 1; y >= 0; --y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        row[static_cast<std::size_t>(x) * img.channels() + c] = static_cast<float>(img(x, y, c));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

inline Raster<double> read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = detail::pnm_token(in);
  if (magic != "PF" && magic != "Pf") throw IoError("pfm: bad magic in " + path.string());
  const int w = std::stoi(detail::pnm_token(in));
  const int h = std::stoi(detail::pnm_token(in));
  const double scale = std::stod(detail::pnm_token(in));
  if (scale >= 0) throw IoError("pfm: only little-endian files are supported");
  const int nc = magic == "PF" ? 3 : 1;
  Raster<double> img(w, h, nc);
  std::vector<float> row(static_cast<std::size_t>(w) * nc);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw IoError("pfm: truncated " + path.string());
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) img(x, y, c) = row[static_cast<std::size_t>(x) * nc + c];
    }
  }
  return img;
}

}  // namespace kmotion::io
