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

#include <cstddef>
#include <string>
#include <vector>

#include "kmotion/diff.hpp"
#include "kmotion/errors.hpp"

namespace kmotion {

/// Row-major planar-interleaved raster: value(x, y, c) at (y * w + x) * c + c.
/// Pixel centers sit at integer coordinates; the image spans [0, w-1] x [0, h-1].
template <class T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1 || channels < 1) {
      throw ContractError("raster: dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  T& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool same_shape(int w, int h) const noexcept { return width_ == w && height_ == h; }
  template <class U>
  bool same_shape(const Raster<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

/// Color image, 1 or 3 channels, values in [0, 1].
template <class T = double>
using Image = Raster<T>;

/// Per-pixel positive depth, single channel.
template <class T = double>
using DepthMap = Raster<T>;

/// Boolean per-pixel map (region masks, occlusion flags).
using BoolMap = Raster<unsigned char>;

template <class T, class U>
void require_same_shape(const Raster<T>& a, const Raster<U>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(what) + ": shape mismatch (" +
                        std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                        " vs " + std::to_string(b.width()) + "x" +
                        std::to_string(b.height()) + ")");
  }
}

template <class T>
Raster<double> values_of(const Raster<T>& r) {
  Raster<double> out(r.width(), r.height(), r.channels());
  for (std::size_t i = 0; i < r.size(); ++i) out.data()[i] = diff::value_of(r.data()[i]);
  return out;
}

template <class T>
Raster<T> lift(const Raster<double>& r) {
  Raster<T> out(r.width(), r.height(), r.channels());
  for (std::size_t i = 0; i < r.size(); ++i) out.data()[i] = T(r.data()[i]);
  return out;
}

}  // namespace kmotion
