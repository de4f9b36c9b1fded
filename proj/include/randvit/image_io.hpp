// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Netpbm (PGM/PPM) input and output for demos and heatmaps.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "randvit/image.hpp"

namespace randvit {

/// Reads P2/P3/P5/P6 with maxval <= 255 and normalises to [-1, 1].
/// Throws BadImage.
ImageTensor read_pnm(const std::filesystem::path& path);

/// Writes a 1-channel image as P5 or a 3-channel image as P6 (values in [-1, 1]).
void write_pnm(const std::filesystem::path& path, const ImageTensor& img);

/// Writes values in [0, 1] as an 8-bit P5 graymap.
void write_unit_pgm(const std::filesystem::path& path, const std::vector<double>& values,
                    int height, int width);

using Rgb = std::array<std::uint8_t, 3>;

class RgbCanvas {
 public:
  RgbCanvas(int height, int width) : height_(height), width_(width),
      pixels_(static_cast<std::size_t>(height) * width * 3, 0) {}

  /// Grayscale copy of a [-1, 1] image (channel mean) at column offset `left`.
  void paste(const ImageTensor& img, int left);
  /// One-pixel outline of a size x size box; clipped to the canvas.
  void outline(double top, double left, int size, Rgb color);
  void set(int y, int x, Rgb color);
  Rgb get(int y, int x) const;

  int height() const { return height_; }
  int width() const { return width_; }
  void write_ppm(const std::filesystem::path& path) const;

 private:
  int height_;
  int width_;
  std::vector<std::uint8_t> pixels_;
};

}  // namespace randvit
