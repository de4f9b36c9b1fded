// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace randvit {

/// Packet-aligned storage. Eigen peels reductions by address, so unaligned
/// buffers would make results depend on where the allocator put them.
template <class T>
using TensorData = std::vector<T, Eigen::aligned_allocator<T>>;

template <class T>
struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  TensorData<T> data;

  std::size_t numel() const { return data.size(); }
};

/// Ordered collection of named tensors. Gradients and optimizer moments use
/// the same layout as the parameters they belong to.
template <class T>
class ParamStore {
 public:
  void add(std::string name, std::vector<int> shape, T fill = T(0)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    tensors_.push_back({std::move(name), std::move(shape), TensorData<T>(n, fill)});
  }

  std::size_t size() const { return tensors_.size(); }
  NamedTensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const NamedTensor<T>& operator[](std::size_t i) const { return tensors_[i]; }

  std::vector<NamedTensor<T>>& tensors() { return tensors_; }
  const std::vector<NamedTensor<T>>& tensors() const { return tensors_; }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
  }

  /// Same names and shapes, every value set to `fill`.
  ParamStore like(T fill = T(0)) const {
    ParamStore out;
    for (const auto& t : tensors_) out.add(t.name, t.shape, fill);
    return out;
  }

  void fill(T v) {
    for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), v);
  }

  const NamedTensor<T>* find(const std::string& name) const {
    for (const auto& t : tensors_) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

 private:
  std::vector<NamedTensor<T>> tensors_;
};

}  // namespace randvit
