// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/SpecialFunctions>

#include "randvit/error.hpp"

namespace randvit {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Grid: return "grid";
    case Mode::A: return "A";
    case Mode::B: return "B";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "grid" || lower == "baseline") return Mode::Grid;
  if (lower == "a") return Mode::A;
  if (lower == "b") return Mode::B;
  throw Error(ErrorKind::BadConfig, "mode must be one of A, B, grid; got '" + s + "'");
}

SamplerKind VitConfig::sampler(Phase phase) const {
  switch (mode) {
    case Mode::Grid: return SamplerKind::Grid;
    case Mode::A: return SamplerKind::Random;
    case Mode::B: return phase == Phase::Train ? SamplerKind::Random : SamplerKind::Grid;
  }
  return SamplerKind::Grid;
}

int VitConfig::sequence_length(Phase phase) const {
  const PatchGeometry geom = geometry();
  if (sampler(phase) == SamplerKind::Grid) return static_cast<int>(std::llround(geom.base_length()));
  return static_cast<int>(SamplingFactor(r).token_count(geom.base_length()));
}

void VitConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw Error(ErrorKind::BadConfig, std::string(what) + " must be >= 1");
  };
  positive(channels, "model.channels");
  positive(patch, "model.patch");
  positive(dim, "model.dim");
  positive(depth, "model.depth");
  positive(heads, "model.heads");
  positive(mlp_ratio, "model.mlp_ratio");
  positive(n_classes, "model.n_classes");
  if (dim % heads != 0) {
    throw Error(ErrorKind::BadDim, "model.dim " + std::to_string(dim) + " not divisible by heads " +
                                       std::to_string(heads));
  }
  posenc().validate();
  const PatchGeometry geom = geometry();
  if (mode != Mode::A && !geom.divisible()) {
    throw Error(ErrorKind::NonDivisibleImage, "grid evaluation needs patch " +
                                                  std::to_string(patch) + " to divide the image");
  }
  if (mode != Mode::Grid) {
    const SamplingFactor factor(r);
    if (factor.token_count(geom.base_length()) < 1) {
      throw Error(ErrorKind::EmptySample, "round(r*L) = 0 for r=" + std::to_string(r));
    }
  }
}

VitConfig VitConfig::desk() { return VitConfig{}; }

VitConfig VitConfig::vit_s16() {
  VitConfig c;
  c.channels = 3;
  c.image_height = 224;
  c.image_width = 224;
  c.patch = 16;
  c.dim = 384;
  c.depth = 12;
  c.heads = 6;
  c.n_classes = 1000;
  return c;
}

VitConfig VitConfig::preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "vit-s16" || name == "vit-s/16") return vit_s16();
  if (name == "tiny") {
    VitConfig c;
    c.image_height = 16;
    c.image_width = 16;
    c.patch = 4;
    c.dim = 8;
    c.depth = 2;
    c.heads = 2;
    c.n_classes = 3;
    return c;
  }
  throw Error(ErrorKind::BadConfig, "unknown model.preset '" + name + "'");
}

PatchCoords sample_coords(const VitConfig& cfg, Phase phase, RandomStream& rng) {
  const PatchGeometry geom = cfg.geometry();
  if (cfg.sampler(phase) == SamplerKind::Grid) return grid_coords(geom);
  return random_coords(geom, SamplingFactor(cfg.r), rng);
}

TokenBatch tokenize(const ImageTensor& img, const VitConfig& cfg, Phase phase, RandomStream& rng) {
  if (img.channels() != cfg.channels || img.height() != cfg.image_height ||
      img.width() != cfg.image_width) {
    throw Error(ErrorKind::ShapeMismatch,
                "image " + std::to_string(img.channels()) + "x" + std::to_string(img.height()) +
                    "x" + std::to_string(img.width()) + " does not match model input");
  }
  TokenBatch tokens = extract_patches(img, sample_coords(cfg, phase, rng), cfg.patch);
  attach_encoding(tokens, cfg.posenc());
  return tokens;
}

// ---------------------------------------------------------------------------
// Parameters

template <class T>
VitParams<T> make_params(const VitConfig& cfg) {
  const int d = cfg.dim;
  const int hid = cfg.hidden_dim();
  VitParams<T> p;
  p.add("embed.weight", {d, cfg.patch_dim()});
  p.add("embed.bias", {d});
  for (int b = 0; b < cfg.depth; ++b) {
    const std::string pre = "blocks." + std::to_string(b) + ".";
    p.add(pre + "ln1.scale", {d}, T(1));
    p.add(pre + "ln1.bias", {d});
    p.add(pre + "attn.qkv.weight", {3 * d, d});
    p.add(pre + "attn.qkv.bias", {3 * d});
    p.add(pre + "attn.out.weight", {d, d});
    p.add(pre + "attn.out.bias", {d});
    p.add(pre + "ln2.scale", {d}, T(1));
    p.add(pre + "ln2.bias", {d});
    p.add(pre + "mlp.fc1.weight", {hid, d});
    p.add(pre + "mlp.fc1.bias", {hid});
    p.add(pre + "mlp.fc2.weight", {d, hid});
    p.add(pre + "mlp.fc2.bias", {d});
  }
  p.add("norm.scale", {d}, T(1));
  p.add("norm.bias", {d});
  p.add("head.weight", {cfg.n_classes, d});
  p.add("head.bias", {cfg.n_classes});
  return p;
}

template <class T>
VitParams<T> init_params(const VitConfig& cfg, std::uint64_t seed) {
  VitParams<T> p = make_params<T>(cfg);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& t = p[i];
    if (t.shape.size() != 2) continue;
    RandomStream rng = RandomStream::derive(seed, "init", {i});
    for (auto& v : t.data) {
      double z = rng.normal();
      while (std::abs(z) > 2.0) z = rng.normal();
      v = static_cast<T>(0.02 * z);
    }
  }
  return p;
}

template <class T>
void check_params(const VitConfig& cfg, const VitParams<T>& params) {
  const VitParams<T> ref = make_params<T>(cfg);
  if (ref.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "expected " + std::to_string(ref.size()) +
                                              " parameter tensors, got " +
                                              std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i].name != params[i].name || ref[i].shape != params[i].shape ||
        ref[i].numel() != params[i].numel()) {
      throw Error(ErrorKind::ShapeMismatch, "parameter " + params[i].name +
                                                " does not match expected " + ref[i].name);
    }
  }
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

template <class T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
Eigen::Map<const Matrix<T>> mat(const NamedTensor<T>& t) {
  return {t.data.data(), t.shape[0], t.shape[1]};
}
template <class T>
Eigen::Map<Matrix<T>> mat(NamedTensor<T>& t) {
  return {t.data.data(), t.shape[0], t.shape[1]};
}
template <class T>
Eigen::Map<const RowVector<T>> vec(const NamedTensor<T>& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.numel())};
}
template <class T>
Eigen::Map<RowVector<T>> vec(NamedTensor<T>& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.numel())};
}

constexpr double kLayerNormEps = 1e-6;

template <class T>
void layer_norm(const Matrix<T>& x, const NamedTensor<T>& scale, const NamedTensor<T>& bias,
                Matrix<T>& xhat, ColVector<T>& rstd, Matrix<T>& y) {
  const ColVector<T> mean = x.rowwise().mean();
  xhat = x.colwise() - mean;
  rstd = (xhat.array().square().rowwise().mean() + T(kLayerNormEps)).rsqrt().matrix();
  xhat.array().colwise() *= rstd.array();
  y = (xhat.array().rowwise() * vec(scale).array()).rowwise() + vec(bias).array();
}

template <class T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const Matrix<T>& xhat, const ColVector<T>& rstd,
                              const NamedTensor<T>& scale, NamedTensor<T>& dscale,
                              NamedTensor<T>& dbias) {
  vec(dscale) += (dy.array() * xhat.array()).colwise().sum().matrix();
  vec(dbias) += dy.colwise().sum();
  const Matrix<T> dxhat = (dy.array().rowwise() * vec(scale).array()).matrix();
  const ColVector<T> mean_d = dxhat.rowwise().mean();
  const ColVector<T> mean_dx = (dxhat.array() * xhat.array()).rowwise().mean().matrix();
  Matrix<T> dx = dxhat.colwise() - mean_d;
  dx -= (xhat.array().colwise() * mean_dx.array()).matrix();
  dx.array().colwise() *= rstd.array();
  return dx;
}

template <class T>
void linear(const Matrix<T>& x, const NamedTensor<T>& w, const NamedTensor<T>& b, Matrix<T>& y) {
  y.noalias() = x * mat(w).transpose();
  y.rowwise() += vec(b);
}

// dy -> (dx, dW, db) for y = x W^T + b.
template <class T>
Matrix<T> linear_backward(const Matrix<T>& dy, const Matrix<T>& x, const NamedTensor<T>& w,
                          NamedTensor<T>& dw, NamedTensor<T>& db) {
  mat(dw).noalias() += dy.transpose() * x;
  vec(db) += dy.colwise().sum();
  Matrix<T> dx;
  dx.noalias() = dy * mat(w);
  return dx;
}

template <class T>
void softmax_rows(Matrix<T>& s) {
  const ColVector<T> mx = s.rowwise().maxCoeff();
  s = (s.colwise() - mx).array().exp().matrix();
  const ColVector<T> sum = s.rowwise().sum();
  s.array().colwise() /= sum.array();
}

template <class T>
void gelu(const Matrix<T>& x, Matrix<T>& y) {
  const T inv_sqrt2 = T(1.0 / std::numbers::sqrt2);
  y = (T(0.5) * x.array() * (T(1) + (x.array() * inv_sqrt2).erf())).matrix();
}

template <class T>
Matrix<T> gelu_backward(const Matrix<T>& dy, const Matrix<T>& x) {
  const T inv_sqrt2 = T(1.0 / std::numbers::sqrt2);
  const T inv_sqrt2pi = T(1.0 / std::sqrt(2.0 * std::numbers::pi));
  const auto xa = x.array();
  const auto cdf = T(0.5) * (T(1) + (xa * inv_sqrt2).erf());
  const auto pdf = (T(-0.5) * xa.square()).exp() * inv_sqrt2pi;
  return (dy.array() * (cdf + xa * pdf)).matrix();
}

template <class T>
void block_forward(const VitConfig& cfg, const VitParams<T>& params, int block,
                   const std::vector<int>& offsets, Matrix<T>& x,
                   typename BatchForward<T>::BlockCache& c) {
  const auto& P = [&](BlockTensor t) -> const NamedTensor<T>& {
    return params[block_index(block, t)];
  };
  const int d = cfg.dim;
  const int dh = cfg.head_dim();
  const T scale = T(1) / std::sqrt(T(dh));
  const int segments = static_cast<int>(offsets.size()) - 1;

  c.x_in = x;
  layer_norm(c.x_in, P(kLn1Scale), P(kLn1Bias), c.xhat1, c.rstd1, c.h1);
  linear(c.h1, P(kQkvWeight), P(kQkvBias), c.qkv);

  c.context.resize(x.rows(), d);
  c.probs.assign(static_cast<std::size_t>(segments) * cfg.heads, Matrix<T>());
  for (int s = 0; s < segments; ++s) {
    const int off = offsets[s];
    const int n = offsets[s + 1] - off;
    for (int h = 0; h < cfg.heads; ++h) {
      const auto q = c.qkv.block(off, h * dh, n, dh);
      const auto k = c.qkv.block(off, d + h * dh, n, dh);
      const auto v = c.qkv.block(off, 2 * d + h * dh, n, dh);
      Matrix<T>& pr = c.probs[static_cast<std::size_t>(s) * cfg.heads + h];
      pr.noalias() = q * k.transpose();
      pr *= scale;
      softmax_rows(pr);
      c.context.block(off, h * dh, n, dh).noalias() = pr * v;
    }
  }

  Matrix<T> attn_out;
  linear(c.context, P(kOutWeight), P(kOutBias), attn_out);
  c.x_mid = c.x_in + attn_out;

  layer_norm(c.x_mid, P(kLn2Scale), P(kLn2Bias), c.xhat2, c.rstd2, c.h2);
  linear(c.h2, P(kFc1Weight), P(kFc1Bias), c.pre_act);
  gelu(c.pre_act, c.act);
  Matrix<T> mlp_out;
  linear(c.act, P(kFc2Weight), P(kFc2Bias), mlp_out);
  x = c.x_mid + mlp_out;
}

template <class T>
Matrix<T> block_backward(const VitConfig& cfg, const VitParams<T>& params, VitParams<T>& grads,
                         int block, const std::vector<int>& offsets,
                         const typename BatchForward<T>::BlockCache& c, const Matrix<T>& dout) {
  const auto& P = [&](BlockTensor t) -> const NamedTensor<T>& {
    return params[block_index(block, t)];
  };
  const auto& G = [&](BlockTensor t) -> NamedTensor<T>& { return grads[block_index(block, t)]; };
  const int d = cfg.dim;
  const int dh = cfg.head_dim();
  const T scale = T(1) / std::sqrt(T(dh));
  const int segments = static_cast<int>(offsets.size()) - 1;

  // MLP branch.
  Matrix<T> dact = linear_backward(dout, c.act, P(kFc2Weight), G(kFc2Weight), G(kFc2Bias));
  const Matrix<T> dpre = gelu_backward(dact, c.pre_act);
  dact.resize(0, 0);
  const Matrix<T> dh2 = linear_backward(dpre, c.h2, P(kFc1Weight), G(kFc1Weight), G(kFc1Bias));
  Matrix<T> dmid = dout;
  dmid += layer_norm_backward(dh2, c.xhat2, c.rstd2, P(kLn2Scale), G(kLn2Scale), G(kLn2Bias));

  // Attention branch.
  const Matrix<T> dctx =
      linear_backward(dmid, c.context, P(kOutWeight), G(kOutWeight), G(kOutBias));
  Matrix<T> dqkv(c.qkv.rows(), 3 * d);
  for (int s = 0; s < segments; ++s) {
    const int off = offsets[s];
    const int n = offsets[s + 1] - off;
    for (int h = 0; h < cfg.heads; ++h) {
      const Matrix<T>& pr = c.probs[static_cast<std::size_t>(s) * cfg.heads + h];
      const auto q = c.qkv.block(off, h * dh, n, dh);
      const auto k = c.qkv.block(off, d + h * dh, n, dh);
      const auto v = c.qkv.block(off, 2 * d + h * dh, n, dh);
      const auto dc = dctx.block(off, h * dh, n, dh);

      Matrix<T> dp;
      dp.noalias() = dc * v.transpose();
      dqkv.block(off, 2 * d + h * dh, n, dh).noalias() = pr.transpose() * dc;
      const ColVector<T> row_dot = (dp.array() * pr.array()).rowwise().sum().matrix();
      Matrix<T> ds = (pr.array() * (dp.colwise() - row_dot).array()).matrix();
      ds *= scale;
      dqkv.block(off, h * dh, n, dh).noalias() = ds * k;
      dqkv.block(off, d + h * dh, n, dh).noalias() = ds.transpose() * q;
    }
  }
  const Matrix<T> dh1 = linear_backward(dqkv, c.h1, P(kQkvWeight), G(kQkvWeight), G(kQkvBias));
  Matrix<T> dx = std::move(dmid);
  dx += layer_norm_backward(dh1, c.xhat1, c.rstd1, P(kLn1Scale), G(kLn1Scale), G(kLn1Bias));
  return dx;
}

std::vector<int> segment_offsets(std::span<const TokenBatch> batch) {
  std::vector<int> offsets{0};
  for (const auto& tb : batch) {
    if (tb.n_tokens < 1) throw Error(ErrorKind::ShapeMismatch, "sequence with no tokens");
    offsets.push_back(offsets.back() + tb.n_tokens);
  }
  return offsets;
}

void check_tokens(const TokenBatch& tb, const VitConfig& cfg) {
  if (tb.patch_dim() != cfg.patch_dim() ||
      tb.pixels.size() != static_cast<std::size_t>(tb.n_tokens) * tb.patch_dim()) {
    throw Error(ErrorKind::ShapeMismatch, "token pixels do not match patch dim " +
                                              std::to_string(cfg.patch_dim()));
  }
  if (tb.embed_dim != cfg.dim ||
      tb.pos_encoding.size() != static_cast<std::size_t>(tb.n_tokens) * cfg.dim) {
    throw Error(ErrorKind::ShapeMismatch,
                "positional encoding missing or not of width " + std::to_string(cfg.dim));
  }
}

}  // namespace

template <class T>
Matrix<T> embed(const TokenBatch& tokens, const VitConfig& cfg, const VitParams<T>& params) {
  check_tokens(tokens, cfg);
  const Eigen::Map<const Matrix<double>> pix(tokens.pixels.data(), tokens.n_tokens,
                                             tokens.patch_dim());
  const Eigen::Map<const Matrix<double>> pos(tokens.pos_encoding.data(), tokens.n_tokens, cfg.dim);
  Matrix<T> x;
  linear(Matrix<T>(pix.cast<T>()), params[embed_weight_index()], params[embed_bias_index()], x);
  x += pos.cast<T>();
  return x;
}

template <class T>
BlockResult<T> transformer_block(const Matrix<T>& x, const VitConfig& cfg,
                                 const VitParams<T>& params, int block) {
  if (x.cols() != cfg.dim || x.rows() < 1 || block < 0 || block >= cfg.depth) {
    throw Error(ErrorKind::ShapeMismatch, "transformer_block input is " +
                                              std::to_string(x.rows()) + "x" +
                                              std::to_string(x.cols()));
  }
  typename BatchForward<T>::BlockCache cache;
  BlockResult<T> res;
  res.out = x;
  block_forward(cfg, params, block, {0, static_cast<int>(x.rows())}, res.out, cache);
  res.attention = std::move(cache.probs);
  return res;
}

template <class T>
BatchForward<T> forward_batch(std::span<const TokenBatch> batch, const VitConfig& cfg,
                              const VitParams<T>& params) {
  BatchForward<T> f;
  f.offsets = segment_offsets(batch);
  const int total = f.offsets.back();
  const int segments = static_cast<int>(batch.size());

  f.pixels.resize(total, cfg.patch_dim());
  Matrix<T> pos(total, cfg.dim);
  for (int s = 0; s < segments; ++s) {
    const TokenBatch& tb = batch[s];
    check_tokens(tb, cfg);
    f.pixels.middleRows(f.offsets[s], tb.n_tokens) =
        Eigen::Map<const Matrix<double>>(tb.pixels.data(), tb.n_tokens, tb.patch_dim()).cast<T>();
    pos.middleRows(f.offsets[s], tb.n_tokens) =
        Eigen::Map<const Matrix<double>>(tb.pos_encoding.data(), tb.n_tokens, cfg.dim).cast<T>();
  }

  Matrix<T> x;
  linear(f.pixels, params[embed_weight_index()], params[embed_bias_index()], x);
  x += pos;

  f.blocks.resize(cfg.depth);
  for (int b = 0; b < cfg.depth; ++b) block_forward(cfg, params, b, f.offsets, x, f.blocks[b]);

  f.final_in = std::move(x);
  layer_norm(f.final_in, params[final_index(cfg, 0)], params[final_index(cfg, 1)], f.final_xhat,
             f.final_rstd, f.final_out);
  f.pooled.resize(segments, cfg.dim);
  for (int s = 0; s < segments; ++s) {
    const int n = f.offsets[s + 1] - f.offsets[s];
    f.pooled.row(s) = f.final_out.middleRows(f.offsets[s], n).colwise().mean();
  }
  linear(f.pooled, params[final_index(cfg, 2)], params[final_index(cfg, 3)], f.logits);
  return f;
}

template <class T>
void backward_batch(const BatchForward<T>& f, const Matrix<T>& dlogits, const VitConfig& cfg,
                    const VitParams<T>& params, VitParams<T>& grads) {
  const int segments = static_cast<int>(f.offsets.size()) - 1;
  if (dlogits.rows() != segments || dlogits.cols() != cfg.n_classes) {
    throw Error(ErrorKind::ShapeMismatch, "dlogits shape does not match batch");
  }
  const Matrix<T> dpooled = linear_backward(dlogits, f.pooled, params[final_index(cfg, 2)],
                                            grads[final_index(cfg, 2)], grads[final_index(cfg, 3)]);
  Matrix<T> dfinal(f.final_out.rows(), cfg.dim);
  for (int s = 0; s < segments; ++s) {
    const int n = f.offsets[s + 1] - f.offsets[s];
    dfinal.middleRows(f.offsets[s], n) = (dpooled.row(s) / T(n)).replicate(n, 1);
  }
  Matrix<T> dx = layer_norm_backward(dfinal, f.final_xhat, f.final_rstd, params[final_index(cfg, 0)],
                                     grads[final_index(cfg, 0)], grads[final_index(cfg, 1)]);
  for (int b = cfg.depth - 1; b >= 0; --b) {
    dx = block_backward(cfg, params, grads, b, f.offsets, f.blocks[b], dx);
  }
  mat(grads[embed_weight_index()]).noalias() += dx.transpose() * f.pixels;
  vec(grads[embed_bias_index()]) += dx.colwise().sum();
}

template <class T>
ForwardTrace forward_tokens(const TokenBatch& tokens, const VitConfig& cfg,
                            const VitParams<T>& params, bool keep_attention) {
  const BatchForward<T> f = forward_batch<T>(std::span<const TokenBatch>(&tokens, 1), cfg, params);
  ForwardTrace trace;
  trace.coords = tokens.coords;
  trace.n_tokens = tokens.n_tokens;
  trace.logits.assign(f.logits.data(), f.logits.data() + f.logits.size());
  if (keep_attention) {
    trace.attention.resize(cfg.depth);
    for (int b = 0; b < cfg.depth; ++b) {
      for (const Matrix<T>& pr : f.blocks[b].probs) {
        trace.attention[b].emplace_back(pr.data(), pr.data() + pr.size());
      }
    }
  }
  return trace;
}

template <class T>
ForwardTrace forward(const ImageTensor& img, const VitConfig& cfg, const VitParams<T>& params,
                     Phase phase, RandomStream& rng) {
  return forward_tokens(tokenize(img, cfg, phase, rng), cfg, params, true);
}

#define RANDVIT_INSTANTIATE(T)                                                                   \
  template VitParams<T> make_params<T>(const VitConfig&);                                        \
  template VitParams<T> init_params<T>(const VitConfig&, std::uint64_t);                         \
  template void check_params<T>(const VitConfig&, const VitParams<T>&);                          \
  template Matrix<T> embed<T>(const TokenBatch&, const VitConfig&, const VitParams<T>&);         \
  template BlockResult<T> transformer_block<T>(const Matrix<T>&, const VitConfig&,               \
                                               const VitParams<T>&, int);                        \
  template BatchForward<T> forward_batch<T>(std::span<const TokenBatch>, const VitConfig&,       \
                                            const VitParams<T>&);                                \
  template void backward_batch<T>(const BatchForward<T>&, const Matrix<T>&, const VitConfig&,    \
                                  const VitParams<T>&, VitParams<T>&);                           \
  template ForwardTrace forward_tokens<T>(const TokenBatch&, const VitConfig&,                   \
                                          const VitParams<T>&, bool);                            \
  template ForwardTrace forward<T>(const ImageTensor&, const VitConfig&, const VitParams<T>&,    \
                                   Phase, RandomStream&);

RANDVIT_INSTANTIATE(float)
RANDVIT_INSTANTIATE(double)

#undef RANDVIT_INSTANTIATE

}  // namespace randvit
