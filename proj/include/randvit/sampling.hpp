// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Patch coordinates live in "patch space": one unit is one patch stride, so
// coordinate (z0, z1) has its top-left pixel at (z0 * P, z1 * P). Grid
// sampling yields the L = (H/P)(W/P) integer positions; random sampling draws
// round(r * L) continuous positions, uniform over [0, H/P - 1] x [0, W/P - 1],
// and extracts them with bilinear interpolation.

#pragma once

#include <cstdint>
#include <vector>

#include "randvit/image.hpp"
#include "randvit/rng.hpp"

namespace randvit {

struct PatchGeometry {
  int height = 0;
  int width = 0;
  int patch = 0;

  PatchGeometry() = default;
  /// Throws BadDim unless patch >= 1 and the image is at least one patch.
  PatchGeometry(int height, int width, int patch);

  double rows_max() const { return static_cast<double>(height) / patch - 1.0; }
  double cols_max() const { return static_cast<double>(width) / patch - 1.0; }
  /// Base sequence length H*W/P^2 (real when P does not divide the image).
  double base_length() const {
    return static_cast<double>(height) * width / (static_cast<double>(patch) * patch);
  }
  bool divisible() const { return height % patch == 0 && width % patch == 0; }
};

enum class SamplerKind { Grid, Random };

const char* to_string(SamplerKind kind);

struct PatchCoord {
  double row = 0.0;  // z0
  double col = 0.0;  // z1
  bool operator==(const PatchCoord&) const = default;
};

struct PatchCoords {
  std::vector<PatchCoord> coords;
  SamplerKind origin = SamplerKind::Grid;

  std::size_t size() const { return coords.size(); }
};

/// Token count multiplier r.
class SamplingFactor {
 public:
  /// Throws BadConfig for non-positive or non-finite r.
  explicit SamplingFactor(double r);
  double value() const { return r_; }
  /// round(r * L), halves away from zero.
  std::int64_t token_count(double base_length) const;

 private:
  double r_;
};

/// Extracted patches for one sequence. `pixels` is n x (C*P*P) row-major,
/// flattened as (channel, row-offset, col-offset). `pos_encoding` is n x D
/// and is filled by the positional encoder.
struct TokenBatch {
  int n_tokens = 0;
  int channels = 0;
  int patch = 0;
  std::vector<double> pixels;
  PatchCoords coords;
  int embed_dim = 0;
  std::vector<double> pos_encoding;

  int patch_dim() const { return channels * patch * patch; }
  const double* token(int i) const {
    return pixels.data() + static_cast<std::size_t>(i) * patch_dim();
  }
};

/// Row-major integer grid. Throws NonDivisibleImage if P does not divide H and W.
PatchCoords grid_coords(const PatchGeometry& geom);

/// round(r*L) i.i.d. uniform coordinates. Throws EmptySample when round(r*L) = 0.
PatchCoords random_coords(const PatchGeometry& geom, const SamplingFactor& r,
                          RandomStream& rng);

/// Bilinear interpolation at pixel position (y, x). Exact at integer positions.
/// Throws OutOfBounds outside [0, H-1] x [0, W-1]; there is no padding mode.
double bilinear_sample(const ImageTensor& img, double y, double x, int channel);

/// Token i, offset (u, v) holds the bilinear sample at (z0*P + u, z1*P + v).
TokenBatch extract_patches(const ImageTensor& img, const PatchCoords& coords, int patch);

}  // namespace randvit
