// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "randvit/error.hpp"

namespace randvit {

ImageTensor::ImageTensor(int channels, int height, int width, std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  if (channels < 0 || height < 0 || width < 0 ||
      data_.size() != static_cast<std::size_t>(channels) * height * width) {
    throw Error(ErrorKind::ShapeMismatch, "image data does not match " + std::to_string(channels) +
                                              "x" + std::to_string(height) + "x" +
                                              std::to_string(width));
  }
}

PatchGeometry::PatchGeometry(int h, int w, int p) : height(h), width(w), patch(p) {
  if (p < 1) throw Error(ErrorKind::BadDim, "patch size must be >= 1");
  if (h < p || w < p) {
    throw Error(ErrorKind::BadDim, "image " + std::to_string(h) + "x" + std::to_string(w) +
                                       " is smaller than patch " + std::to_string(p));
  }
}

const char* to_string(SamplerKind kind) {
  return kind == SamplerKind::Grid ? "grid" : "random";
}

SamplingFactor::SamplingFactor(double r) : r_(r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(ErrorKind::BadConfig, "sampling factor r must be positive, got " + std::to_string(r));
  }
}

std::int64_t SamplingFactor::token_count(double base_length) const {
  return std::llround(r_ * base_length);
}

PatchCoords grid_coords(const PatchGeometry& geom) {
  if (!geom.divisible()) {
    throw Error(ErrorKind::NonDivisibleImage,
                "patch " + std::to_string(geom.patch) + " does not divide " +
                    std::to_string(geom.height) + "x" + std::to_string(geom.width));
  }
  PatchCoords out;
  out.origin = SamplerKind::Grid;
  const int rows = geom.height / geom.patch;
  const int cols = geom.width / geom.patch;
  out.coords.reserve(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out.coords.push_back({double(i), double(j)});
  }
  return out;
}

PatchCoords random_coords(const PatchGeometry& geom, const SamplingFactor& r, RandomStream& rng) {
  const std::int64_t n = r.token_count(geom.base_length());
  if (n < 1) {
    throw Error(ErrorKind::EmptySample, "round(r*L) = 0 for r=" + std::to_string(r.value()) +
                                            ", L=" + std::to_string(geom.base_length()));
  }
  PatchCoords out;
  out.origin = SamplerKind::Random;
  out.coords.resize(static_cast<std::size_t>(n));
  const double rmax = geom.rows_max();
  const double cmax = geom.cols_max();
  for (auto& c : out.coords) {
    c.row = rng.uniform(0.0, rmax);
    c.col = rng.uniform(0.0, cmax);
  }
  return out;
}

namespace {

[[noreturn]] void out_of_bounds(double y, double x, const ImageTensor& img) {
  throw Error(ErrorKind::OutOfBounds, "sample (" + std::to_string(y) + ", " + std::to_string(x) +
                                          ") outside " + std::to_string(img.height()) + "x" +
                                          std::to_string(img.width()));
}

inline double lerp2(const ImageTensor& img, int c, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  const double top = (1.0 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1);
  const double bottom = (1.0 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1);
  return (1.0 - fy) * top + fy * bottom;
}

// Top-left pixel for a patch coordinate; absorbs float noise from (H/P - 1) * P.
double patch_origin(double z, int patch, int extent) {
  const double origin = z * patch;
  const double limit = extent - patch;
  if (origin > limit && origin <= limit + 1e-9 * extent) return limit;
  return origin;
}

}  // namespace

double bilinear_sample(const ImageTensor& img, double y, double x, int channel) {
  if (!(y >= 0.0 && y <= img.height() - 1) || !(x >= 0.0 && x <= img.width() - 1)) {
    out_of_bounds(y, x, img);
  }
  if (channel < 0 || channel >= img.channels()) {
    throw Error(ErrorKind::OutOfBounds, "channel " + std::to_string(channel));
  }
  return lerp2(img, channel, y, x);
}

TokenBatch extract_patches(const ImageTensor& img, const PatchCoords& coords, int patch) {
  TokenBatch tb;
  tb.n_tokens = static_cast<int>(coords.size());
  tb.channels = img.channels();
  tb.patch = patch;
  tb.coords = coords;
  tb.pixels.resize(static_cast<std::size_t>(tb.n_tokens) * tb.patch_dim());

  double* out = tb.pixels.data();
  for (const PatchCoord& z : coords.coords) {
    const double top = patch_origin(z.row, patch, img.height());
    const double left = patch_origin(z.col, patch, img.width());
    if (!(top >= 0.0 && top + patch - 1 <= img.height() - 1) ||
        !(left >= 0.0 && left + patch - 1 <= img.width() - 1)) {
      out_of_bounds(top + patch - 1, left + patch - 1, img);
    }
    for (int c = 0; c < img.channels(); ++c) {
      for (int u = 0; u < patch; ++u) {
        for (int v = 0; v < patch; ++v) *out++ = lerp2(img, c, top + u, left + v);
      }
    }
  }
  return tb;
}

}  // namespace randvit
