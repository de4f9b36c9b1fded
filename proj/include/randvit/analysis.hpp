// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "randvit/model.hpp"
#include "randvit/sampling.hpp"

namespace randvit {

/// Leading-order inference cost. Each multiply-accumulate counts as
/// `flops_per_mac` operations (1 by default, the convention behind the
/// commonly quoted ViT-S/16 figure of 4.6 GFLOPs at 196 tokens).
///   embed      n * D * C * P^2
///   attention  4 n D^2 (qkv + output projections) + 2 n^2 D (scores, weighted sum)
///   mlp        2 * mlp_ratio * n * D^2
///   head       D * K
/// Softmax, LayerNorm, GELU and pooling are not counted.
struct FlopsReport {
  std::int64_t n_tokens = 0;
  double embed = 0.0;
  double attention = 0.0;  // per block
  double mlp = 0.0;        // per block
  double head = 0.0;
  int depth = 0;
  double total = 0.0;

  double gflops() const { return total * 1e-9; }
};

FlopsReport count_flops(const VitConfig& cfg, std::int64_t n_tokens, double flops_per_mac = 1.0);

/// Top-1 percent per GFLOP. Throws DivisionByZero for gflops <= 0.
double work_efficiency(double top1_percent, double gflops);

enum class RolloutReduce {
  ColMean,    // mean over query rows of the rollout: attention each token receives
  RowOfMean,  // same, excluding each token's own row (attention from other tokens)
};

const char* to_string(RolloutReduce r);
RolloutReduce parse_rollout_reduce(const std::string& s);

/// Head-averaged, identity-blended, row-normalised layer matrices and their
/// running products R_k = A_k ... A_1. Throws NonStochasticInput when an
/// attention row sums to something other than 1 (tolerance 1e-3).
struct RolloutProducts {
  int n = 0;
  std::vector<std::vector<double>> layers;    // n x n each
  std::vector<std::vector<double>> products;  // products[k] = layers[k] ... layers[0]
};

RolloutProducts rollout_products(const ForwardTrace& trace);

/// Per-token scores min-max normalised to [0, 1].
std::vector<double> attention_rollout(const ForwardTrace& trace,
                                      RolloutReduce reduce = RolloutReduce::ColMean);

struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // row-major, in [0, 1]
  std::string mode;
  double r = 0.0;
  std::uint64_t seed = 0;
};

/// Min-max normalisation; a constant positive map becomes all ones, a
/// constant non-positive map all zeros.
void normalize_minmax(std::vector<double>& v);

/// Coverage-weighted accumulation of token scores over their P x P pixel
/// footprints (top-left at round(z * P)), before normalisation. Pixels no
/// token covers are 0.
std::vector<double> accumulate_footprints(const std::vector<double>& scores,
                                          const PatchCoords& coords, const PatchGeometry& geom);

/// Grid coordinates: one cell per patch upscaled by nearest neighbour.
/// Random coordinates: accumulate_footprints. Result is min-max normalised.
/// Throws ShapeMismatch when scores and coords differ in length.
Heatmap render_heatmap(const std::vector<double>& scores, const PatchCoords& coords,
                       const PatchGeometry& geom, Mode mode);

}  // namespace randvit
