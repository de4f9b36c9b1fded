// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams. Every consumer derives its own stream from
// (run seed, purpose, indices...), so results never depend on call order or
// on how work is split across workers.

#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace randvit {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Deterministic stream keyed by a 64-bit key; the 128-bit counter advances
/// one block per four 32-bit outputs. Satisfies UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint32_t;

  RandomStream() = default;
  explicit RandomStream(std::uint64_t key) : key_(key) {}

  /// Stream for `purpose` below the run seed, e.g.
  /// `RandomStream::derive(seed, "sample", {epoch, batch, image})`.
  static RandomStream derive(std::uint64_t seed, std::string_view purpose,
                             std::initializer_list<std::uint64_t> indices = {});

  /// Child stream; independent of this stream's position.
  RandomStream split(std::uint64_t index) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();
  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform double in [lo, hi].
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (no cached second value).
  double normal();
  /// Gamma(shape, 1), Marsaglia-Tsang.
  double gamma(double shape);
  /// Beta(a, b) as a ratio of gammas.
  double beta(double a, double b);

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_ * 4 + lane_; }

 private:
  void refill();

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  unsigned lane_ = 4;
};

/// SplitMix64 finalizer; used for key derivation.
std::uint64_t mix64(std::uint64_t x);

}  // namespace randvit
