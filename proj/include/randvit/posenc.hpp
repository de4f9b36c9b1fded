// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "randvit/sampling.hpp"

namespace randvit {

/// Fixed 2D sin-cos encoding. D must be a multiple of 4.
struct PosEncConfig {
  int dim = 128;
  double temperature = 10000.0;

  /// Throws BadDim for D % 4 != 0 or D < 4, BadConfig for temperature <= 1.
  void validate() const;
};

/// n x D row-major table. With K = D/4 and w_k = T^(-k/K), each row is
/// [sin(w z0) | cos(w z0) | sin(w z1) | cos(w z1)], evaluated in patch space.
std::vector<double> encode(const PatchCoords& coords, const PosEncConfig& cfg);

/// Single-row variant of encode; writes D values to `out`.
void encode_row(const PatchCoord& z, const PosEncConfig& cfg, double* out);

/// Fills tokens.pos_encoding from tokens.coords.
void attach_encoding(TokenBatch& tokens, const PosEncConfig& cfg);

}  // namespace randvit
