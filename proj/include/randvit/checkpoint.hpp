// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container, little-endian, version 1:
//
//   8 bytes   magic "RVCKPT\0\1"
//   u32       format version (= 1)
//   u32 + N   config echo (key = value text, includes train.decay)
//   u64       run seed
//   u64       optimizer steps taken (with the seed this fixes every stream)
//   u32       tensor count
//   per tensor:
//     u32 + N   name
//     u32       rank, then rank x u32 dims
//     u8        dtype (0 = f32, 1 = f64)
//     bytes     values
//   u64       FNV-1a 64 checksum of all preceding bytes

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "randvit/params.hpp"

namespace randvit {

struct Checkpoint {
  std::string config_text;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  ParamStore<float> params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws BadCheckpoint on a bad magic, version, checksum or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace randvit
