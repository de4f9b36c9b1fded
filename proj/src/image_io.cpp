// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "randvit/data.hpp"
#include "randvit/error.hpp"

namespace randvit {

namespace {

class PnmReader {
 public:
  explicit PnmReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  int next_int(const std::string& what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw Error(ErrorKind::BadImage, "expected " + what);
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1 << 20) throw Error(ErrorKind::BadImage, what + " too large");
    }
    return static_cast<int>(v);
  }

  void skip_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(ErrorKind::BadImage, "missing whitespace after header");
    }
    ++pos_;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const unsigned char* cursor() const { return bytes_.data() + pos_; }
  std::size_t pos_ = 0;

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::vector<unsigned char> bytes_;
};

void write_file(const std::filesystem::path& path, const std::string& header,
                const std::vector<std::uint8_t>& payload) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << header;
  f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
}

}  // namespace

ImageTensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::BadImage, "cannot open image " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P' || !(bytes[1] == '2' || bytes[1] == '3' ||
                                               bytes[1] == '5' || bytes[1] == '6')) {
    throw Error(ErrorKind::BadImage, path.string() + " is not a PGM/PPM file");
  }
  const char kind = static_cast<char>(bytes[1]);
  const int channels = (kind == '3' || kind == '6') ? 3 : 1;
  PnmReader rd(std::move(bytes));
  rd.pos_ = 2;
  const int width = rd.next_int("width");
  const int height = rd.next_int("height");
  const int maxval = rd.next_int("maxval");
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255) {
    throw Error(ErrorKind::BadImage, path.string() + ": unsupported dimensions or maxval");
  }
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  std::vector<std::uint8_t> interleaved(count);
  if (kind == '5' || kind == '6') {
    rd.skip_single_whitespace();
    if (rd.remaining() < count) throw Error(ErrorKind::BadImage, path.string() + ": truncated");
    std::copy(rd.cursor(), rd.cursor() + count, interleaved.begin());
  } else {
    for (auto& v : interleaved) v = static_cast<std::uint8_t>(std::min(rd.next_int("sample"), maxval));
  }

  ImageTensor img(channels, height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const int raw = interleaved[(static_cast<std::size_t>(y) * width + x) * channels + c];
        const int scaled = maxval == 255 ? raw : static_cast<int>(std::lround(raw * 255.0 / maxval));
        img.at(c, y, x) = normalize_byte(static_cast<std::uint8_t>(scaled));
      }
    }
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const ImageTensor& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw Error(ErrorKind::BadImage, "PNM output needs 1 or 3 channels");
  }
  std::vector<std::uint8_t> payload(img.size());
  std::size_t k = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) payload[k++] = denormalize_value(img.at(c, y, x));
    }
  }
  const std::string header = std::string(img.channels() == 1 ? "P5\n" : "P6\n") +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             "\n255\n";
  write_file(path, header, payload);
}

void write_unit_pgm(const std::filesystem::path& path, const std::vector<double>& values,
                    int height, int width) {
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorKind::ShapeMismatch, "heatmap size does not match dimensions");
  }
  std::vector<std::uint8_t> payload(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    payload[i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
  }
  write_file(path, "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n",
             payload);
}

void RgbCanvas::set(int y, int x, Rgb color) {
  if (y < 0 || y >= height_ || x < 0 || x >= width_) return;
  std::copy(color.begin(), color.end(),
            pixels_.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(y) * width_ + x) * 3));
}

Rgb RgbCanvas::get(int y, int x) const {
  const std::size_t k = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {pixels_[k], pixels_[k + 1], pixels_[k + 2]};
}

void RgbCanvas::paste(const ImageTensor& img, int left) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double v = 0.0;
      for (int c = 0; c < img.channels(); ++c) v += img.at(c, y, x);
      const std::uint8_t g = denormalize_value(v / img.channels());
      set(y, left + x, {g, g, g});
    }
  }
}

void RgbCanvas::outline(double top, double left, int size, Rgb color) {
  const int t = static_cast<int>(std::lround(top));
  const int l = static_cast<int>(std::lround(left));
  const int b = t + size - 1;
  const int r = l + size - 1;
  for (int x = l; x <= r; ++x) {
    set(t, x, color);
    set(b, x, color);
  }
  for (int y = t; y <= b; ++y) {
    set(y, l, color);
    set(y, r, color);
  }
}

void RgbCanvas::write_ppm(const std::filesystem::path& path) const {
  write_file(path, "P6\n" + std::to_string(width_) + " " + std::to_string(height_) + "\n255\n",
             pixels_);
}

}  // namespace randvit
