// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// A small ViT: linear patch embedding + fixed sin-cos positions, pre-norm
// transformer blocks, final LayerNorm, global average pooling, linear head.
// No class token, no dropout. The tokenizer is pluggable: grid slicing or
// random continuous-coordinate sampling.
//
// Forward and backward are written by hand over row-major Eigen matrices and
// templated on the scalar type: float for training, double for gradient
// checks.

#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "randvit/image.hpp"
#include "randvit/params.hpp"
#include "randvit/posenc.hpp"
#include "randvit/rng.hpp"
#include "randvit/sampling.hpp"

namespace randvit {

/// Grid: baseline ViT. A: random tokens in training and evaluation.
/// B: random tokens in training, grid tokens in evaluation.
enum class Mode { Grid, A, B };
enum class Phase { Train, Eval };

const char* to_string(Mode mode);
/// Accepts "grid", "A", "B" (case-insensitive). Throws BadConfig.
Mode parse_mode(const std::string& s);

struct VitConfig {
  int channels = 1;
  int image_height = 64;
  int image_width = 64;
  int patch = 8;
  int dim = 128;
  int depth = 6;
  int heads = 4;
  int mlp_ratio = 4;
  int n_classes = 5;
  double pos_temperature = 10000.0;
  Mode mode = Mode::Grid;
  double r = 1.0;

  SamplerKind sampler(Phase phase) const;
  PosEncConfig posenc() const { return {dim, pos_temperature}; }
  PatchGeometry geometry() const { return {image_height, image_width, patch}; }
  int patch_dim() const { return channels * patch * patch; }
  int head_dim() const { return dim / heads; }
  int hidden_dim() const { return dim * mlp_ratio; }
  /// Tokens per sequence in the given phase.
  int sequence_length(Phase phase) const;

  /// Throws BadDim / BadConfig on inconsistent hyper-parameters.
  void validate() const;

  /// Default CPU-trainable configuration (P=8, D=128, depth 6, 4 heads).
  static VitConfig desk();
  /// ViT-S/16 on 224x224x3 with 1000 classes.
  static VitConfig vit_s16();
  /// Named preset lookup ("desk", "vit-s16", "tiny"). Throws BadConfig.
  static VitConfig preset(const std::string& name);
};

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// Parameter layout, in order: embed.{weight,bias}; per block
/// ln1.{scale,bias}, attn.qkv.{weight,bias}, attn.out.{weight,bias},
/// ln2.{scale,bias}, mlp.fc1.{weight,bias}, mlp.fc2.{weight,bias};
/// norm.{scale,bias}; head.{weight,bias}. Weights are (out, in).
template <class T>
using VitParams = ParamStore<T>;

inline constexpr int kTensorsPerBlock = 12;
enum BlockTensor : int {
  kLn1Scale, kLn1Bias, kQkvWeight, kQkvBias, kOutWeight, kOutBias,
  kLn2Scale, kLn2Bias, kFc1Weight, kFc1Bias, kFc2Weight, kFc2Bias,
};
inline std::size_t embed_weight_index() { return 0; }
inline std::size_t embed_bias_index() { return 1; }
inline std::size_t block_index(int block, BlockTensor t) {
  return 2 + static_cast<std::size_t>(block) * kTensorsPerBlock + t;
}
inline std::size_t final_index(const VitConfig& cfg, int i) {
  return 2 + static_cast<std::size_t>(cfg.depth) * kTensorsPerBlock + i;
}

/// Zero-valued parameters with the layout above (LayerNorm scales = 1).
template <class T>
VitParams<T> make_params(const VitConfig& cfg);

/// Truncated-normal(0.02) weights, zero biases, unit LayerNorm scales.
template <class T>
VitParams<T> init_params(const VitConfig& cfg, std::uint64_t seed);

/// Throws ShapeMismatch unless names and shapes match `cfg`.
template <class T>
void check_params(const VitConfig& cfg, const VitParams<T>& params);

/// Coordinates for one image in the given phase; random draws come from rng.
PatchCoords sample_coords(const VitConfig& cfg, Phase phase, RandomStream& rng);

/// coords -> extract -> positional encoding.
TokenBatch tokenize(const ImageTensor& img, const VitConfig& cfg, Phase phase, RandomStream& rng);

/// Row i = W * flatten(patch_i) + b + pos_i. Throws ShapeMismatch.
template <class T>
Matrix<T> embed(const TokenBatch& tokens, const VitConfig& cfg, const VitParams<T>& params);

template <class T>
struct BlockResult {
  Matrix<T> out;
  std::vector<Matrix<T>> attention;  // one n x n post-softmax matrix per head
};

/// Pre-norm block: x + MHSA(LN(x)), then + MLP(LN(.)).
template <class T>
BlockResult<T> transformer_block(const Matrix<T>& x, const VitConfig& cfg,
                                 const VitParams<T>& params, int block);

struct ForwardTrace {
  std::vector<double> logits;
  /// attention[block][head] is n x n row-major.
  std::vector<std::vector<std::vector<double>>> attention;
  PatchCoords coords;
  int n_tokens = 0;
};

/// Full pipeline on one image.
template <class T>
ForwardTrace forward(const ImageTensor& img, const VitConfig& cfg, const VitParams<T>& params,
                     Phase phase, RandomStream& rng);

/// Logits and attention for pre-built tokens (positions attached).
template <class T>
ForwardTrace forward_tokens(const TokenBatch& tokens, const VitConfig& cfg,
                            const VitParams<T>& params, bool keep_attention = true);

/// Cached activations for a batch of sequences; sequences may differ in length.
template <class T>
struct BatchForward {
  std::vector<int> offsets;  // sequence b spans rows [offsets[b], offsets[b+1])
  Matrix<T> logits;          // B x n_classes

  struct BlockCache {
    Matrix<T> x_in, xhat1, h1, qkv, context, x_mid, xhat2, h2, pre_act, act;
    Eigen::Matrix<T, Eigen::Dynamic, 1> rstd1, rstd2;
    std::vector<Matrix<T>> probs;  // [segment * heads + head]
  };
  Matrix<T> pixels;  // N x patch_dim
  std::vector<BlockCache> blocks;
  Matrix<T> final_in, final_xhat, final_out, pooled;
  Eigen::Matrix<T, Eigen::Dynamic, 1> final_rstd;
};

/// Batched forward over token sequences; keeps what backward needs.
template <class T>
BatchForward<T> forward_batch(std::span<const TokenBatch> batch, const VitConfig& cfg,
                              const VitParams<T>& params);

/// Accumulates parameter gradients into `grads` given dL/dlogits (B x K).
template <class T>
void backward_batch(const BatchForward<T>& fwd, const Matrix<T>& dlogits, const VitConfig& cfg,
                    const VitParams<T>& params, VitParams<T>& grads);

/// Element-wise cast, e.g. float checkpoints evaluated in double.
template <class To, class From>
VitParams<To> cast_params(const VitParams<From>& params) {
  VitParams<To> out;
  for (const auto& t : params.tensors()) {
    out.add(t.name, t.shape);
    auto& dst = out[out.size() - 1].data;
    for (std::size_t i = 0; i < t.data.size(); ++i) dst[i] = static_cast<To>(t.data[i]);
  }
  return out;
}

}  // namespace randvit
