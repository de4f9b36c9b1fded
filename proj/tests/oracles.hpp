// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used by the tests. They deliberately avoid the
// library code paths they check against.

#pragma once

#include <cmath>
#include <vector>

#include "randvit/image.hpp"
#include "randvit/rng.hpp"

namespace oracle {

inline randvit::ImageTensor random_image(int c, int h, int w, randvit::RandomStream& rng) {
  randvit::ImageTensor img(c, h, w);
  for (double& v : img.data()) v = rng.uniform(-1.0, 1.0);
  return img;
}

/// Row-major P x P blocks, each flattened (channel, row, col).
inline std::vector<double> slice_patches(const randvit::ImageTensor& img, int p) {
  std::vector<double> out;
  for (int by = 0; by < img.height() / p; ++by) {
    for (int bx = 0; bx < img.width() / p; ++bx) {
      for (int c = 0; c < img.channels(); ++c) {
        for (int u = 0; u < p; ++u) {
          for (int v = 0; v < p; ++v) out.push_back(img.at(c, by * p + u, bx * p + v));
        }
      }
    }
  }
  return out;
}

/// One P x P block with top-left pixel (top, left).
inline std::vector<double> slice_at(const randvit::ImageTensor& img, int top, int left, int p) {
  std::vector<double> out;
  for (int c = 0; c < img.channels(); ++c) {
    for (int u = 0; u < p; ++u) {
      for (int v = 0; v < p; ++v) out.push_back(img.at(c, top + u, left + v));
    }
  }
  return out;
}

/// Stride-P, kernel-P convolution. kernel[o][c][u][v] is stored flat in
/// (o, c, u, v) order. Returns (H/P * W/P) x D, positions row-major.
inline std::vector<double> conv_stride(const randvit::ImageTensor& img, const std::vector<double>& kernel,
                                       const std::vector<double>& bias, int p, int d) {
  const int gh = img.height() / p;
  const int gw = img.width() / p;
  const int c_in = img.channels();
  std::vector<double> out(static_cast<std::size_t>(gh) * gw * d, 0.0);
  for (int oy = 0; oy < gh; ++oy) {
    for (int ox = 0; ox < gw; ++ox) {
      for (int o = 0; o < d; ++o) {
        double acc = bias[o];
        for (int c = 0; c < c_in; ++c) {
          for (int u = 0; u < p; ++u) {
            for (int v = 0; v < p; ++v) {
              acc += kernel[((static_cast<std::size_t>(o) * c_in + c) * p + u) * p + v] *
                     img.at(c, oy * p + u, ox * p + v);
            }
          }
        }
        out[(static_cast<std::size_t>(oy) * gw + ox) * d + o] = acc;
      }
    }
  }
  return out;
}

/// Fixed 2-D sin-cos table in the meshgrid style: build the per-axis 1-D
/// tables over the integer grid, then concatenate [emb(row), emb(col)].
inline std::vector<std::vector<double>> sincos_table(int grid_h, int grid_w, int d, double tau) {
  const int k = d / 4;
  std::vector<double> omega(k);
  for (int i = 0; i < k; ++i) omega[i] = 1.0 / std::pow(tau, static_cast<double>(i) / k);
  auto emb_1d = [&](double pos) {
    std::vector<double> e(2 * k);
    for (int i = 0; i < k; ++i) {
      e[i] = std::sin(pos * omega[i]);
      e[k + i] = std::cos(pos * omega[i]);
    }
    return e;
  };
  std::vector<std::vector<double>> table;
  for (int gy = 0; gy < grid_h; ++gy) {
    for (int gx = 0; gx < grid_w; ++gx) {
      auto row = emb_1d(gy);
      const auto col = emb_1d(gx);
      row.insert(row.end(), col.begin(), col.end());
      table.push_back(row);
    }
  }
  return table;
}

/// softmax(q k^T / sqrt(dh)) for n x dh row-major q and k, by direct loops.
inline std::vector<double> attention_probs(const std::vector<double>& q, const std::vector<double>& k,
                                           int n, int dh) {
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    double mx = -1e300;
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int t = 0; t < dh; ++t) s += q[i * dh + t] * k[j * dh + t];
      s /= std::sqrt(static_cast<double>(dh));
      a[i * n + j] = s;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += (a[i * n + j] = std::exp(a[i * n + j] - mx));
    for (int j = 0; j < n; ++j) a[i * n + j] /= z;
  }
  return a;
}

}  // namespace oracle
