// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "randvit/analysis.hpp"
#include "randvit/error.hpp"

using namespace randvit;

namespace {

ForwardTrace trace_from(const std::vector<std::vector<double>>& layers, int n) {
  ForwardTrace t;
  t.n_tokens = n;
  for (const auto& a : layers) t.attention.push_back({a});
  return t;
}

std::vector<double> identity(int n) {
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) a[i * n + i] = 1.0;
  return a;
}

std::vector<double> random_stochastic(int n, RandomStream& rng) {
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += (a[i * n + j] = rng.uniform01() + 1e-3);
    for (int j = 0; j < n; ++j) a[i * n + j] /= s;
  }
  return a;
}

PatchCoords random_coords_of(std::vector<PatchCoord> c) {
  PatchCoords out;
  out.coords = std::move(c);
  out.origin = SamplerKind::Random;
  return out;
}

}  // namespace

TEST_CASE("ViT-S/16 inference GFLOPs") {
  const VitConfig cfg = VitConfig::vit_s16();
  // Reference values for the token counts of r = 1, 2, 3, 4, 0.5.
  CHECK(count_flops(cfg, 196).gflops() == doctest::Approx(4.6).epsilon(0.05));
  CHECK(count_flops(cfg, 392).gflops() == doctest::Approx(9.9).epsilon(0.05));
  CHECK(count_flops(cfg, 588).gflops() == doctest::Approx(15.9).epsilon(0.05));
  CHECK(count_flops(cfg, 784).gflops() == doctest::Approx(22.6).epsilon(0.05));
  CHECK(count_flops(cfg, 98).gflops() == doctest::Approx(2.2).epsilon(0.10));
}

TEST_CASE("FLOPs report decomposition") {
  const VitConfig cfg = VitConfig::vit_s16();
  const auto r = count_flops(cfg, 196);
  CHECK(r.total == r.embed + r.depth * (r.attention + r.mlp) + r.head);
  CHECK(r.embed == 196.0 * 384 * 768);
  CHECK(r.attention == 4.0 * 196 * 384 * 384 + 2.0 * 196 * 196 * 384);
  CHECK(r.mlp == 8.0 * 196 * 384 * 384);
  CHECK(r.head == 384.0 * 1000);
  const auto two = count_flops(cfg, 196, 2.0);
  CHECK(two.total == 2.0 * r.total);

  const auto zero = count_flops(cfg, 0);
  CHECK(zero.embed == 0.0);
  CHECK(zero.attention == 0.0);
  CHECK(zero.mlp == 0.0);
  CHECK_THROWS_AS(count_flops(cfg, -1), Error);
}

TEST_CASE("FLOPs are linear plus quadratic in n") {
  const VitConfig cfg = VitConfig::desk();
  auto f = [&](std::int64_t n) { return count_flops(cfg, n).total - count_flops(cfg, 0).total; };
  // f(n) = a n + b n^2: f(2) - 2 f(1) = 2b, f(4) - 4 f(1) = 12 b.
  const double b = (f(2) - 2 * f(1)) / 2;
  const double a = f(1) - b;
  CHECK(f(4) - 4 * f(1) == doctest::Approx(12 * b));
  const double d = cfg.dim;
  const double a_closed = d * cfg.patch_dim() + cfg.depth * (4 * d * d + 2.0 * cfg.mlp_ratio * d * d);
  const double b_closed = cfg.depth * 2 * d;
  CHECK(a == doctest::Approx(a_closed));
  CHECK(b == doctest::Approx(b_closed));
  for (std::int64_t n : {7, 64, 300}) CHECK(f(n) == doctest::Approx(a_closed * n + b_closed * n * n));
}

TEST_CASE("Mode B inference cost does not depend on the training r") {
  VitConfig cfg = VitConfig::vit_s16();
  cfg.mode = Mode::B;
  const double base = count_flops(cfg, cfg.sequence_length(Phase::Eval)).total;
  for (double r : {0.5, 1.0, 2.0, 3.0, 4.0}) {
    cfg.r = r;
    CHECK(count_flops(cfg, cfg.sequence_length(Phase::Eval)).total == base);
  }
}

TEST_CASE("work efficiency") {
  CHECK(work_efficiency(54.10, 4.6) == doctest::Approx(11.76).epsilon(1e-3));
  CHECK(work_efficiency(59.86, 22.6) == doctest::Approx(2.65).epsilon(1e-3));
  CHECK(work_efficiency(37.5, 1.0) == 37.5);
  try {
    work_efficiency(50.0, 0.0);
    FAIL("expected DivisionByZero");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DivisionByZero);
  }
}

TEST_CASE("rollout of identity attention is uniform") {
  const auto scores = attention_rollout(trace_from({identity(5)}, 5));
  for (double s : scores) CHECK(s == 1.0);
  const auto products = rollout_products(trace_from({identity(5)}, 5));
  CHECK(products.products[0] == identity(5));
}

TEST_CASE("rollout when every query attends to token 0") {
  const int n = 4;
  std::vector<double> a(n * n, 0.0);
  for (int i = 0; i < n; ++i) a[i * n] = 1.0;
  for (auto reduce : {RolloutReduce::ColMean, RolloutReduce::RowOfMean}) {
    const auto s = attention_rollout(trace_from({a}, n), reduce);
    CHECK(s[0] == 1.0);
    for (int i = 1; i < n; ++i) CHECK(s[i] < 1.0);
  }
  // Blended layer is 0.5 e0 + 0.5 I: column 0 mean = (1 + 0.5 * 3) / 4.
  const auto p = rollout_products(trace_from({a}, n));
  double col0 = 0.0;
  for (int i = 0; i < n; ++i) col0 += p.products[0][i * n];
  CHECK(col0 / n == doctest::Approx(0.625));
}

TEST_CASE("rollout products stay row-stochastic") {
  RandomStream rng(3);
  for (int depth : {3, 6}) {
    const int n = 9;
    ForwardTrace t;
    t.n_tokens = n;
    for (int b = 0; b < depth; ++b) {
      std::vector<std::vector<double>> heads;
      for (int h = 0; h < 3; ++h) heads.push_back(random_stochastic(n, rng));
      t.attention.push_back(heads);
    }
    const auto p = rollout_products(t);
    REQUIRE(p.products.size() == static_cast<std::size_t>(depth));
    for (const auto& r : p.products) {
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += r[i * n + j];
        REQUIRE(std::abs(s - 1.0) < 1e-5);
      }
    }
  }
}

TEST_CASE("rollout rejects non-stochastic attention") {
  auto a = identity(3);
  a[0] = 1.01;
  try {
    rollout_products(trace_from({a}, 3));
    FAIL("expected NonStochasticInput");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonStochasticInput);
  }
}

TEST_CASE("row-of-mean excludes each token's own row") {
  const int n = 3;
  // Layer where token 2 attends to itself strongly and others spread evenly.
  const std::vector<double> a = {0.5, 0.25, 0.25, 0.25, 0.5, 0.25, 0.0, 0.0, 1.0};
  const auto p = rollout_products(trace_from({a}, n));
  const auto& r = p.products[0];
  std::vector<double> expected(n, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i != j) expected[j] += r[i * n + j] / (n - 1);
    }
  }
  normalize_minmax(expected);
  const auto got = attention_rollout(trace_from({a}, n), RolloutReduce::RowOfMean);
  for (int j = 0; j < n; ++j) CHECK(got[j] == doctest::Approx(expected[j]));
  CHECK(parse_rollout_reduce("row-of-mean") == RolloutReduce::RowOfMean);
  CHECK(std::string(to_string(RolloutReduce::ColMean)) == "col-mean");
  CHECK_THROWS_AS(parse_rollout_reduce("max"), Error);
}

TEST_CASE("min-max normalisation") {
  std::vector<double> v = {2.0, 4.0, 3.0};
  normalize_minmax(v);
  CHECK(v == std::vector<double>{0.0, 1.0, 0.5});
  auto again = v;
  normalize_minmax(again);
  CHECK(again == v);
  std::vector<double> flat = {0.3, 0.3};
  normalize_minmax(flat);
  CHECK(flat == std::vector<double>{1.0, 1.0});
  std::vector<double> zeros = {0.0, 0.0};
  normalize_minmax(zeros);
  CHECK(zeros == std::vector<double>{0.0, 0.0});
}

TEST_CASE("grid heatmap upscales cells") {
  const PatchGeometry g(8, 12, 4);
  const auto coords = grid_coords(g);
  const auto flat = render_heatmap(std::vector<double>(6, 0.7), coords, g, Mode::Grid);
  CHECK(flat.height == 8);
  CHECK(flat.width == 12);
  for (double v : flat.values) CHECK(v == 1.0);

  const std::vector<double> s = {0, 1, 2, 3, 4, 5};
  const auto hm = render_heatmap(s, coords, g, Mode::Grid);
  CHECK(hm.values[0] == 0.0);
  CHECK(hm.values[3] == 0.0);
  CHECK(hm.values[4] == doctest::Approx(0.2));
  CHECK(hm.values[7 * 12 + 11] == 1.0);
  CHECK_THROWS_AS(render_heatmap({1.0}, coords, g, Mode::Grid), Error);
}

TEST_CASE("single random token heatmap covers its footprint") {
  const PatchGeometry g(10, 10, 4);
  const auto hm = render_heatmap({1.0}, random_coords_of({{0.5, 1.0}}), g, Mode::A);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      const bool inside = y >= 2 && y < 6 && x >= 4 && x < 8;
      REQUIRE(hm.values[y * 10 + x] == (inside ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("overlapping tokens average by coverage") {
  const PatchGeometry g(8, 8, 4);
  const auto coords = random_coords_of({{0.25, 0.25}, {0.25, 0.25}});
  const auto acc = accumulate_footprints({0.2, 0.8}, coords, g);
  CHECK(acc[1 * 8 + 1] == doctest::Approx(0.5));
  CHECK(acc[0] == 0.0);

  // Partial overlap: shared pixels get the mean, the rest their own score.
  const auto two = accumulate_footprints({0.2, 0.8}, random_coords_of({{0.0, 0.0}, {0.0, 0.5}}), g);
  CHECK(two[0] == doctest::Approx(0.2));
  CHECK(two[2] == doctest::Approx(0.5));
  CHECK(two[5] == doctest::Approx(0.8));
}

TEST_CASE("heatmap values stay in the unit interval") {
  RandomStream rng(4);
  const PatchGeometry g(32, 32, 8);
  const auto coords = random_coords(g, SamplingFactor(3.0), rng);
  std::vector<double> s(coords.size());
  for (double& v : s) v = rng.uniform01();
  const auto hm = render_heatmap(s, coords, g, Mode::A);
  CHECK(*std::max_element(hm.values.begin(), hm.values.end()) == 1.0);
  for (double v : hm.values) REQUIRE((v >= 0.0 && v <= 1.0));
}
