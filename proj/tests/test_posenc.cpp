// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <tuple>

#include "doctest.h"
#include "oracles.hpp"
#include "randvit/error.hpp"
#include "randvit/posenc.hpp"
#include "randvit/sampling.hpp"

using namespace randvit;

namespace {

PatchCoords single(double row, double col) {
  PatchCoords c;
  c.coords = {{row, col}};
  c.origin = SamplerKind::Random;
  return c;
}

}  // namespace

TEST_CASE("origin encodes as zeros and ones") {
  for (int d : {4, 8, 16, 128}) {
    const auto row = encode(single(0, 0), {d, 10000.0});
    const int k = d / 4;
    REQUIRE(row.size() == static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) CHECK(row[i] == ((i / k) % 2 == 0 ? 0.0 : 1.0));
  }
}

TEST_CASE("D=8 at (1, 2)") {
  const auto row = encode(single(1, 2), {8, 10000.0});
  const std::vector<double> expected = {std::sin(1.0), std::sin(0.01), std::cos(1.0), std::cos(0.01),
                                        std::sin(2.0), std::sin(0.02), std::cos(2.0), std::cos(0.02)};
  REQUIRE(row.size() == expected.size());
  for (std::size_t i = 0; i < row.size(); ++i) CHECK(row[i] == doctest::Approx(expected[i]).epsilon(1e-14));
}

TEST_CASE("identical coordinates give identical rows") {
  PatchCoords c;
  c.coords = {{1.25, 3.5}, {0.1, 0.2}, {1.25, 3.5}};
  const auto e = encode(c, {16, 10000.0});
  CHECK(std::equal(e.begin(), e.begin() + 16, e.begin() + 32));
}

TEST_CASE("config validation") {
  auto kind = [](PosEncConfig cfg) {
    try {
      cfg.validate();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind({6, 10000.0}) == ErrorKind::BadDim);
  CHECK(kind({0, 10000.0}) == ErrorKind::BadDim);
  CHECK(kind({8, 1.0}) == ErrorKind::BadConfig);
  CHECK_THROWS_AS(encode(single(0, 0), {10, 10000.0}), Error);
}

TEST_CASE("grid encoding matches the fixed sin-cos table") {
  for (const auto& [h, w, p, d] : {std::tuple{224, 224, 16, 384}, std::tuple{64, 64, 8, 128},
                                   std::tuple{32, 48, 8, 16}}) {
    const auto coords = grid_coords(PatchGeometry(h, w, p));
    const auto enc = encode(coords, {d, 10000.0});
    const auto table = oracle::sincos_table(h / p, w / p, d, 10000.0);
    REQUIRE(table.size() == coords.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
      for (int j = 0; j < d; ++j) {
        REQUIRE(enc[i * d + j] == doctest::Approx(table[i][j]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("sin^2 + cos^2 = 1 per frequency") {
  RandomStream rng(11);
  const int d = 64;
  const int k = d / 4;
  for (int t = 0; t < 100; ++t) {
    const auto e = encode(single(rng.uniform(0, 13), rng.uniform(0, 13)), {d, 10000.0});
    for (int axis = 0; axis < 2; ++axis) {
      for (int i = 0; i < k; ++i) {
        const double s = e[axis * 2 * k + i];
        const double c = e[axis * 2 * k + k + i];
        REQUIRE(std::abs(s * s + c * c - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("encoding is Lipschitz in the coordinates") {
  RandomStream rng(12);
  const PosEncConfig cfg{32, 10000.0};
  for (int t = 0; t < 100; ++t) {
    const double y = rng.uniform(0, 13);
    const double x = rng.uniform(0, 13);
    const double dy = rng.uniform(-1e-3, 1e-3);
    const double dx = rng.uniform(-1e-3, 1e-3);
    const auto a = encode(single(y, x), cfg);
    const auto b = encode(single(y + dy, x + dx), cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    // max_k omega_k = omega_0 = 1
    REQUIRE(worst <= 1.0 * (std::abs(dy) + std::abs(dx)) + 1e-15);
  }
}

TEST_CASE("attach_encoding fills one row per token") {
  const ImageTensor img(1, 16, 16, 0.0);
  auto tokens = extract_patches(img, grid_coords(PatchGeometry(16, 16, 4)), 4);
  attach_encoding(tokens, {8, 10000.0});
  CHECK(tokens.embed_dim == 8);
  CHECK(tokens.pos_encoding.size() == 16u * 8);
  const auto direct = encode(tokens.coords, {8, 10000.0});
  CHECK(tokens.pos_encoding == direct);
}
