// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "randvit/error.hpp"

namespace randvit {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'V', 'C', 'K', 'P', 'T', '\0', '\1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void put_bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<unsigned char>& bytes() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, p_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto len = get<std::uint32_t>();
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  void get_bytes(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, p_ + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw Error(ErrorKind::BadCheckpoint, "checkpoint is truncated");
  }
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes(kMagic.data(), kMagic.size());
  w.put(kVersion);
  w.put_string(ckpt.config_text);
  w.put(ckpt.seed);
  w.put(static_cast<std::uint64_t>(ckpt.steps));
  w.put(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& t : ckpt.params.tensors()) {
    w.put_string(t.name);
    w.put(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.put(static_cast<std::uint32_t>(d));
    w.put(std::uint8_t{0});
    w.put_bytes(t.data.data(), t.data.size() * sizeof(float));
  }
  const std::uint64_t sum = fnv1a(w.bytes().data(), w.bytes().size());
  w.put(sum);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(w.bytes().data()),
          static_cast<std::streamsize>(w.bytes().size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::BadCheckpoint, "cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < kMagic.size() + sizeof(std::uint64_t) ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorKind::BadCheckpoint, path.string() + " is not a checkpoint");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.data(), body)) {
    throw Error(ErrorKind::BadCheckpoint, path.string() + ": checksum mismatch");
  }

  Reader r(bytes.data() + kMagic.size(), body - kMagic.size());
  if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
    throw Error(ErrorKind::BadCheckpoint, "unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint ck;
  ck.config_text = r.get_string();
  ck.seed = r.get<std::uint64_t>();
  ck.steps = static_cast<std::int64_t>(r.get<std::uint64_t>());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw Error(ErrorKind::BadCheckpoint, "tensor " + name + " has rank " + std::to_string(rank));
    std::vector<int> shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<int>(r.get<std::uint32_t>());
      numel *= static_cast<std::size_t>(d);
    }
    const auto dtype = r.get<std::uint8_t>();
    ck.params.add(name, shape);
    auto& dst = ck.params[ck.params.size() - 1].data;
    if (dtype == 0) {
      r.get_bytes(dst.data(), numel * sizeof(float));
    } else if (dtype == 1) {
      std::vector<double> tmp(numel);
      r.get_bytes(tmp.data(), numel * sizeof(double));
      for (std::size_t k = 0; k < numel; ++k) dst[k] = static_cast<float>(tmp[k]);
    } else {
      throw Error(ErrorKind::BadCheckpoint, "tensor " + name + " has unknown dtype");
    }
  }
  if (r.pos() != body - kMagic.size()) {
    throw Error(ErrorKind::BadCheckpoint, path.string() + ": trailing bytes");
  }
  return ck;
}

}  // namespace randvit
