// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "randvit/error.hpp"

namespace randvit {

FlopsReport count_flops(const VitConfig& cfg, std::int64_t n_tokens, double flops_per_mac) {
  if (n_tokens < 0) throw Error(ErrorKind::BadConfig, "token count must be >= 0");
  const double n = static_cast<double>(n_tokens);
  const double d = cfg.dim;
  FlopsReport r;
  r.n_tokens = n_tokens;
  r.depth = cfg.depth;
  r.embed = flops_per_mac * n * d * cfg.patch_dim();
  r.attention = flops_per_mac * (4.0 * n * d * d + 2.0 * n * n * d);
  r.mlp = flops_per_mac * 2.0 * cfg.mlp_ratio * n * d * d;
  r.head = flops_per_mac * d * cfg.n_classes;
  r.total = r.embed + cfg.depth * (r.attention + r.mlp) + r.head;
  return r;
}

double work_efficiency(double top1_percent, double gflops) {
  if (!(gflops > 0.0)) {
    throw Error(ErrorKind::DivisionByZero, "work efficiency needs positive GFLOPs");
  }
  return top1_percent / gflops;
}

const char* to_string(RolloutReduce r) {
  return r == RolloutReduce::ColMean ? "col-mean" : "row-of-mean";
}

RolloutReduce parse_rollout_reduce(const std::string& s) {
  if (s == "col-mean") return RolloutReduce::ColMean;
  if (s == "row-of-mean") return RolloutReduce::RowOfMean;
  throw Error(ErrorKind::BadConfig, "rollout reduction must be col-mean or row-of-mean, got '" +
                                        s + "'");
}

RolloutProducts rollout_products(const ForwardTrace& trace) {
  const int n = trace.n_tokens;
  const auto nn = static_cast<std::size_t>(n) * n;
  RolloutProducts out;
  out.n = n;
  for (std::size_t b = 0; b < trace.attention.size(); ++b) {
    const auto& heads = trace.attention[b];
    if (heads.empty()) throw Error(ErrorKind::ShapeMismatch, "block without attention heads");
    std::vector<double> avg(nn, 0.0);
    for (const auto& a : heads) {
      if (a.size() != nn) throw Error(ErrorKind::ShapeMismatch, "attention is not n x n");
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += a[static_cast<std::size_t>(i) * n + j];
        if (!(std::abs(s - 1.0) <= 1e-3)) {
          throw Error(ErrorKind::NonStochasticInput, "block " + std::to_string(b) + " row " +
                                                         std::to_string(i) + " sums to " +
                                                         std::to_string(s));
        }
      }
      for (std::size_t k = 0; k < nn; ++k) avg[k] += a[k] / static_cast<double>(heads.size());
    }
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        double& v = avg[static_cast<std::size_t>(i) * n + j];
        v = 0.5 * v + (i == j ? 0.5 : 0.0);
        s += v;
      }
      for (int j = 0; j < n; ++j) avg[static_cast<std::size_t>(i) * n + j] /= s;
    }

    if (out.products.empty()) {
      out.products.push_back(avg);
    } else {
      const auto& prev = out.products.back();
      std::vector<double> prod(nn, 0.0);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          const double a = avg[static_cast<std::size_t>(i) * n + k];
          if (a == 0.0) continue;
          for (int j = 0; j < n; ++j) {
            prod[static_cast<std::size_t>(i) * n + j] += a * prev[static_cast<std::size_t>(k) * n + j];
          }
        }
      }
      out.products.push_back(std::move(prod));
    }
    out.layers.push_back(std::move(avg));
  }
  return out;
}

void normalize_minmax(std::vector<double>& v) {
  if (v.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) {
    std::fill(v.begin(), v.end(), hi > 0.0 ? 1.0 : 0.0);
    return;
  }
  for (double& x : v) x = (x - lo) / (hi - lo);
}

std::vector<double> attention_rollout(const ForwardTrace& trace, RolloutReduce reduce) {
  const RolloutProducts rp = rollout_products(trace);
  const int n = rp.n;
  if (rp.products.empty()) throw Error(ErrorKind::ShapeMismatch, "trace has no attention maps");
  const auto& r = rp.products.back();
  std::vector<double> scores(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (reduce == RolloutReduce::RowOfMean && i == j && n > 1) continue;
      scores[static_cast<std::size_t>(j)] += r[static_cast<std::size_t>(i) * n + j];
    }
  }
  const double denom = (reduce == RolloutReduce::RowOfMean && n > 1) ? n - 1 : n;
  for (double& s : scores) s /= denom;
  normalize_minmax(scores);
  return scores;
}

std::vector<double> accumulate_footprints(const std::vector<double>& scores,
                                          const PatchCoords& coords, const PatchGeometry& geom) {
  if (scores.size() != coords.size()) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(scores.size()) + " scores for " +
                                              std::to_string(coords.size()) + " tokens");
  }
  const auto hw = static_cast<std::size_t>(geom.height) * geom.width;
  std::vector<double> sum(hw, 0.0);
  std::vector<double> coverage(hw, 0.0);
  for (std::size_t t = 0; t < coords.size(); ++t) {
    const int top = std::clamp(static_cast<int>(std::lround(coords.coords[t].row * geom.patch)), 0,
                               geom.height - geom.patch);
    const int left = std::clamp(static_cast<int>(std::lround(coords.coords[t].col * geom.patch)), 0,
                                geom.width - geom.patch);
    for (int y = top; y < top + geom.patch; ++y) {
      for (int x = left; x < left + geom.patch; ++x) {
        const auto k = static_cast<std::size_t>(y) * geom.width + x;
        sum[k] += scores[t];
        coverage[k] += 1.0;
      }
    }
  }
  for (std::size_t k = 0; k < hw; ++k) sum[k] = coverage[k] > 0.0 ? sum[k] / coverage[k] : 0.0;
  return sum;
}

Heatmap render_heatmap(const std::vector<double>& scores, const PatchCoords& coords,
                       const PatchGeometry& geom, Mode mode) {
  if (scores.size() != coords.size()) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(scores.size()) + " scores for " +
                                              std::to_string(coords.size()) + " tokens");
  }
  Heatmap hm;
  hm.height = geom.height;
  hm.width = geom.width;
  hm.mode = to_string(mode);
  if (coords.origin == SamplerKind::Grid) {
    const int rows = geom.height / geom.patch;
    const int cols = geom.width / geom.patch;
    if (static_cast<std::size_t>(rows) * cols != coords.size()) {
      throw Error(ErrorKind::ShapeMismatch, "grid scores do not form a " + std::to_string(rows) +
                                                "x" + std::to_string(cols) + " grid");
    }
    std::vector<double> cells(coords.size(), 0.0);
    for (std::size_t t = 0; t < coords.size(); ++t) {
      const auto i = static_cast<std::size_t>(coords.coords[t].row);
      const auto j = static_cast<std::size_t>(coords.coords[t].col);
      cells[i * cols + j] = scores[t];
    }
    hm.values.resize(static_cast<std::size_t>(geom.height) * geom.width);
    for (int y = 0; y < geom.height; ++y) {
      const int i = y * rows / geom.height;
      for (int x = 0; x < geom.width; ++x) {
        const int j = x * cols / geom.width;
        hm.values[static_cast<std::size_t>(y) * geom.width + x] =
            cells[static_cast<std::size_t>(i) * cols + j];
      }
    }
  } else {
    hm.values = accumulate_footprints(scores, coords, geom);
  }
  normalize_minmax(hm.values);
  return hm;
}

}  // namespace randvit
