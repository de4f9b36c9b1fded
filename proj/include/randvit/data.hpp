// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Datasets: the binary small-image corpus, normalization to [-1, 1],
// bilinear resizing and the synthetic glyph task.
//
// Corpus file layout (little-endian, version 1):
//
//   offset  size  field
//   0       4     magic "RVDS"
//   4       4     u32 version (= 1)
//   8       4     u32 channels C
//   12      4     u32 height H
//   16      4     u32 width W
//   20      4     u32 class count K
//   24      ...   records: 1 label byte, then C*H*W pixel bytes (channel-major)

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "randvit/image.hpp"

namespace randvit {

enum class Split { Train, Val };

struct Dataset {
  std::vector<ImageTensor> images;
  std::vector<int> labels;
  int n_classes = 0;
  Split split = Split::Train;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  /// Throws SchemaMismatch if sizes disagree or a label is out of range.
  void validate() const;
  std::vector<std::size_t> class_counts() const;
};

/// v -> v / 127.5 - 1.
double normalize_byte(std::uint8_t v);
/// Inverse of normalize_byte, rounded and clamped to [0, 255].
std::uint8_t denormalize_value(double v);

ImageTensor normalize(std::span<const std::uint8_t> bytes, int channels, int height, int width);
std::vector<std::uint8_t> denormalize(const ImageTensor& img);

/// Corner-aligned bilinear resize; bit-identical copy when the size is unchanged.
ImageTensor resize_bilinear(const ImageTensor& img, int height, int width);

struct CorpusHeader {
  static constexpr std::array<char, 4> kMagic = {'R', 'V', 'D', 'S'};
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kBytes = 24;

  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t n_classes = 0;

  std::size_t record_bytes() const {
    return 1 + static_cast<std::size_t>(channels) * height * width;
  }
};

/// Throws Io, SchemaMismatch or TruncatedFile.
Dataset load_binary_corpus(const std::filesystem::path& path, Split split = Split::Train);

/// Writes images (denormalized to bytes) with the header above.
void save_binary_corpus(const std::filesystem::path& path, const Dataset& data);

struct GlyphGeometry {
  int height = 64;
  int width = 64;
  int glyph = 6;
  int n_classes = 5;
  double noise_sigma = 0.1;
  double background = -1.0;
  double amplitude = 2.0;
};

/// The K binary glyph templates, each glyph x glyph, row-major.
std::vector<std::vector<std::uint8_t>> glyph_templates(const GlyphGeometry& geom = {});

struct GlyphPlacement {
  int top = 0;
  int left = 0;
};

/// Class-balanced (label = i mod K) single-channel glyph images at uniform
/// pixel positions on a clipped Gaussian background. Placements are returned
/// through `placements` when non-null. Throws BadConfig when n < K.
Dataset synth_glyphs(std::size_t n, std::uint64_t seed, const GlyphGeometry& geom = {},
                     std::vector<GlyphPlacement>* placements = nullptr);

}  // namespace randvit
