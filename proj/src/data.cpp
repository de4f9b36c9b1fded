// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "randvit/error.hpp"
#include "randvit/rng.hpp"

namespace randvit {

void Dataset::validate() const {
  if (images.size() != labels.size()) {
    throw Error(ErrorKind::SchemaMismatch, std::to_string(images.size()) + " images but " +
                                               std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw Error(ErrorKind::SchemaMismatch, "label " + std::to_string(labels[i]) + " at record " +
                                                 std::to_string(i) + " outside [0, " +
                                                 std::to_string(n_classes) + ")");
    }
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(n_classes, 0)), 0);
  for (int l : labels) {
    if (l >= 0 && l < n_classes) ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

double normalize_byte(std::uint8_t v) { return v / 127.5 - 1.0; }

std::uint8_t denormalize_value(double v) {
  const double b = std::round((v + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(b, 0.0, 255.0));
}

ImageTensor normalize(std::span<const std::uint8_t> bytes, int channels, int height, int width) {
  std::vector<double> data(bytes.size());
  std::transform(bytes.begin(), bytes.end(), data.begin(), normalize_byte);
  return ImageTensor(channels, height, width, std::move(data));
}

std::vector<std::uint8_t> denormalize(const ImageTensor& img) {
  std::vector<std::uint8_t> out(img.size());
  std::transform(img.data().begin(), img.data().end(), out.begin(), denormalize_value);
  return out;
}

namespace {

// Corner-aligned source position; a single output sample reads the centre.
double source_position(int i, int in, int out) {
  if (out == 1) return (in - 1) / 2.0;
  return static_cast<double>(i) * (in - 1) / (out - 1);
}

}  // namespace

ImageTensor resize_bilinear(const ImageTensor& img, int height, int width) {
  if (height < 1 || width < 1) {
    throw Error(ErrorKind::BadDim, "resize target must be at least 1x1");
  }
  if (height == img.height() && width == img.width()) return img;
  ImageTensor out(img.channels(), height, width);
  for (int y = 0; y < height; ++y) {
    const double sy = source_position(y, img.height(), height);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = source_position(x, img.width(), width);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1.0 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1);
        const double bottom = (1.0 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1);
        out.at(c, y, x) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

}  // namespace

Dataset load_binary_corpus(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open corpus " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < CorpusHeader::kBytes) {
    throw Error(ErrorKind::TruncatedFile, path.string() + ": header needs " +
                                              std::to_string(CorpusHeader::kBytes) + " bytes");
  }
  if (std::memcmp(bytes.data(), CorpusHeader::kMagic.data(), 4) != 0) {
    throw Error(ErrorKind::SchemaMismatch, path.string() + ": bad magic");
  }
  if (read_u32(bytes.data() + 4) != CorpusHeader::kVersion) {
    throw Error(ErrorKind::SchemaMismatch,
                path.string() + ": unsupported version " + std::to_string(read_u32(bytes.data() + 4)));
  }
  CorpusHeader h;
  h.channels = read_u32(bytes.data() + 8);
  h.height = read_u32(bytes.data() + 12);
  h.width = read_u32(bytes.data() + 16);
  h.n_classes = read_u32(bytes.data() + 20);
  if (h.channels == 0 || h.height == 0 || h.width == 0 || h.n_classes == 0 || h.n_classes > 256 ||
      h.channels > 4 || h.height > 1u << 15 || h.width > 1u << 15) {
    throw Error(ErrorKind::SchemaMismatch, path.string() + ": implausible header dimensions");
  }

  const std::size_t payload = bytes.size() - CorpusHeader::kBytes;
  const std::size_t rec = h.record_bytes();
  if (payload % rec != 0) {
    throw Error(ErrorKind::TruncatedFile, path.string() + ": payload of " +
                                              std::to_string(payload) +
                                              " bytes is not a multiple of record size " +
                                              std::to_string(rec));
  }

  Dataset ds;
  ds.n_classes = static_cast<int>(h.n_classes);
  ds.split = split;
  const std::size_t count = payload / rec;
  ds.images.reserve(count);
  ds.labels.reserve(count);
  const unsigned char* p = bytes.data() + CorpusHeader::kBytes;
  for (std::size_t i = 0; i < count; ++i, p += rec) {
    ds.labels.push_back(p[0]);
    ds.images.push_back(normalize(std::span<const std::uint8_t>(p + 1, rec - 1),
                                  static_cast<int>(h.channels), static_cast<int>(h.height),
                                  static_cast<int>(h.width)));
  }
  ds.validate();
  return ds;
}

void save_binary_corpus(const std::filesystem::path& path, const Dataset& data) {
  data.validate();
  CorpusHeader h;
  if (!data.empty()) {
    h.channels = static_cast<std::uint32_t>(data.images[0].channels());
    h.height = static_cast<std::uint32_t>(data.images[0].height());
    h.width = static_cast<std::uint32_t>(data.images[0].width());
  }
  h.n_classes = static_cast<std::uint32_t>(data.n_classes);
  std::vector<unsigned char> out(CorpusHeader::kMagic.begin(), CorpusHeader::kMagic.end());
  put_u32(out, CorpusHeader::kVersion);
  put_u32(out, h.channels);
  put_u32(out, h.height);
  put_u32(out, h.width);
  put_u32(out, h.n_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ImageTensor& img = data.images[i];
    if (static_cast<std::uint32_t>(img.channels()) != h.channels ||
        static_cast<std::uint32_t>(img.height()) != h.height ||
        static_cast<std::uint32_t>(img.width()) != h.width) {
      throw Error(ErrorKind::SchemaMismatch, "corpus images must share one shape");
    }
    out.push_back(static_cast<unsigned char>(data.labels[i]));
    const auto px = denormalize(img);
    out.insert(out.end(), px.begin(), px.end());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write corpus " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

std::vector<std::vector<std::uint8_t>> glyph_templates(const GlyphGeometry& geom) {
  static const char* const kGlyphs[] = {
      "..##.."
      "..##.."
      "######"
      "######"
      "..##.."
      "..##..",

      "#....#"
      ".#..#."
      "..##.."
      "..##.."
      ".#..#."
      "#....#",

      "######"
      "#....#"
      "#....#"
      "#....#"
      "#....#"
      "######",

      "######"
      "......"
      "######"
      "......"
      "######"
      "......",

      "##..##"
      "##..##"
      "..##.."
      "..##.."
      "##..##"
      "##..##",

      "#.#.#."
      "#.#.#."
      "#.#.#."
      "#.#.#."
      "#.#.#."
      "#.#.#.",

      "#....."
      "#....."
      "#....."
      "#....."
      "#....."
      "######",

      ".....#"
      "....#."
      "...#.."
      "..#..."
      ".#...."
      "#.....",
  };
  constexpr int kAvailable = static_cast<int>(std::size(kGlyphs));
  if (geom.glyph != 6 || geom.n_classes < 1 || geom.n_classes > kAvailable) {
    throw Error(ErrorKind::BadConfig, "glyph templates exist for 6x6 glyphs and 1.." +
                                          std::to_string(kAvailable) + " classes");
  }
  std::vector<std::vector<std::uint8_t>> out;
  for (int k = 0; k < geom.n_classes; ++k) {
    std::vector<std::uint8_t> t(36);
    for (int i = 0; i < 36; ++i) t[i] = kGlyphs[k][i] == '#' ? 1 : 0;
    out.push_back(std::move(t));
  }
  return out;
}

Dataset synth_glyphs(std::size_t n, std::uint64_t seed, const GlyphGeometry& geom,
                     std::vector<GlyphPlacement>* placements) {
  if (n < static_cast<std::size_t>(geom.n_classes)) {
    throw Error(ErrorKind::BadConfig, "synth_glyphs needs n >= K (" + std::to_string(n) + " < " +
                                          std::to_string(geom.n_classes) + ")");
  }
  if (geom.height < geom.glyph || geom.width < geom.glyph) {
    throw Error(ErrorKind::BadConfig, "glyph does not fit the image");
  }
  const auto templates = glyph_templates(geom);
  Dataset ds;
  ds.n_classes = geom.n_classes;
  ds.images.reserve(n);
  ds.labels.reserve(n);
  if (placements) placements->clear();

  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(geom.n_classes));
    RandomStream rng = RandomStream::derive(seed, "glyph", {i});
    const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(geom.height - geom.glyph + 1)));
    const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(geom.width - geom.glyph + 1)));

    ImageTensor img(1, geom.height, geom.width);
    for (double& v : img.data()) v = geom.background + geom.noise_sigma * rng.normal();
    const auto& t = templates[static_cast<std::size_t>(label)];
    for (int u = 0; u < geom.glyph; ++u) {
      for (int v = 0; v < geom.glyph; ++v) {
        if (t[static_cast<std::size_t>(u * geom.glyph + v)]) img.at(0, top + u, left + v) += geom.amplitude;
      }
    }
    for (double& v : img.data()) v = std::clamp(v, -1.0, 1.0);

    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
    if (placements) placements->push_back({top, left});
  }
  return ds;
}

}  // namespace randvit
