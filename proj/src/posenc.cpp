// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/posenc.hpp"

#include <cmath>
#include <string>

#include "randvit/error.hpp"

namespace randvit {

void PosEncConfig::validate() const {
  if (dim < 4 || dim % 4 != 0) {
    throw Error(ErrorKind::BadDim, "positional encoding dim must be a positive multiple of 4, got " +
                                       std::to_string(dim));
  }
  if (!(temperature > 1.0)) {
    throw Error(ErrorKind::BadConfig, "positional encoding temperature must exceed 1");
  }
}

void encode_row(const PatchCoord& z, const PosEncConfig& cfg, double* out) {
  const int k_count = cfg.dim / 4;
  for (int k = 0; k < k_count; ++k) {
    const double omega = std::pow(cfg.temperature, -static_cast<double>(k) / k_count);
    out[k] = std::sin(omega * z.row);
    out[k_count + k] = std::cos(omega * z.row);
    out[2 * k_count + k] = std::sin(omega * z.col);
    out[3 * k_count + k] = std::cos(omega * z.col);
  }
}

std::vector<double> encode(const PatchCoords& coords, const PosEncConfig& cfg) {
  cfg.validate();
  std::vector<double> table(coords.size() * static_cast<std::size_t>(cfg.dim));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    encode_row(coords.coords[i], cfg, table.data() + i * cfg.dim);
  }
  return table;
}

void attach_encoding(TokenBatch& tokens, const PosEncConfig& cfg) {
  tokens.pos_encoding = encode(tokens.coords, cfg);
  tokens.embed_dim = cfg.dim;
}

}  // namespace randvit
