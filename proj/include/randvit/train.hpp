// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training recipe: Adam with weight decay, linear warm-up followed by cosine
// decay, cross-entropy, optional MixUp, per-epoch validation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "randvit/data.hpp"
#include "randvit/model.hpp"

namespace randvit {

enum class WeightDecayMode { Decoupled, L2 };

const char* to_string(WeightDecayMode mode);
WeightDecayMode parse_weight_decay_mode(const std::string& s);

struct TrainConfig {
  int epochs = 90;
  int batch_size = 64;
  double lr = 0.0007;
  double weight_decay = 0.0001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double warmup_fraction = 0.0444;
  double mixup_alpha = 0.0;  // 0 disables MixUp
  WeightDecayMode decay = WeightDecayMode::Decoupled;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 1234;
  int eval_draws = 1;

  /// Throws BadConfig naming the offending field.
  void validate() const;
};

/// round(warmup_fraction * total_steps).
std::int64_t warmup_steps(std::int64_t total_steps, const TrainConfig& cfg);

/// Linear warm-up to cfg.lr over the warm-up steps, then half-cosine to 0.
double lr_at(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg);

template <class T>
struct AdamState {
  ParamStore<T> m;
  ParamStore<T> v;
  std::int64_t step = 0;
};

template <class T>
AdamState<T> make_adam_state(const ParamStore<T>& params) {
  return {params.like(), params.like(), 0};
}

/// One bias-corrected Adam update. Decoupled mode adds lr * lambda * theta to
/// the step; L2 mode folds lambda * theta into the gradient. Throws
/// NonFiniteGradient (leaving params and state untouched) on NaN/Inf.
template <class T>
void adam_step(ParamStore<T>& params, const ParamStore<T>& grads, AdamState<T>& state, double lr,
               const TrainConfig& cfg);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits = softmax(logits) - target
};

/// -sum t_i log softmax(z)_i with a max-shifted softmax.
LossGrad cross_entropy(std::span<const double> logits, std::span<const double> target);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> one_hot(int label, int n_classes);

struct MixupBatch {
  std::vector<ImageTensor> images;
  std::vector<std::vector<double>> targets;
  std::vector<std::size_t> partner;  // within-batch permutation
  std::vector<double> weight;        // m per sample
};

/// x' = m x1 + (1 - m) x2 and y' likewise, with m ~ Beta(alpha, alpha) per
/// sample and partners from a within-batch permutation.
MixupBatch mixup(std::span<const ImageTensor> images, std::span<const std::vector<double>> targets,
                 RandomStream& rng, double alpha);

/// Blend with a fixed weight; exposed for the m = 0 / 0.5 / 1 edge cases.
ImageTensor blend_images(const ImageTensor& a, const ImageTensor& b, double m);
std::vector<double> blend_targets(std::span<const double> a, std::span<const double> b, double m);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_top1 = 0.0;  // percent
  double lr = 0.0;        // learning rate at the last step of the epoch
  double wall_seconds = 0.0;
};

struct MetricsLog {
  std::vector<EpochMetrics> rows;

  static constexpr const char* kHeader = "epoch,train_loss,val_loss,val_top1,lr";
  /// Deterministic columns only; wall time goes to write_timing_csv.
  void write_csv(const std::filesystem::path& path) const;
  void write_timing_csv(const std::filesystem::path& path) const;
};

struct EvalResult {
  double top1 = 0.0;  // percent
  double mean_loss = 0.0;
  std::size_t count = 0;
};

/// Argmax accuracy over the split. Random-token evaluation draws from
/// (eval_seed, draw, image) streams and averages logits over `draws`.
/// Throws EmptySplit.
template <class T>
EvalResult evaluate(const VitConfig& cfg, const VitParams<T>& params, const Dataset& split,
                    std::uint64_t eval_seed, int draws = 1, int batch_size = 64);

/// Per-image augmentation applied before tokenization. Left empty by default;
/// RandAugment-style policies plug in here.
using AugmentHook = std::function<void(ImageTensor&, RandomStream&)>;

struct TrainHooks {
  AugmentHook augment;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  MetricsLog log;
  VitParams<float> params;
  std::int64_t steps = 0;
};

/// Full run: shuffle, (MixUp), tokenize, forward, cross-entropy, backward,
/// lr_at, adam_step; validates every epoch with the evaluation sampler.
/// NonFiniteGradient is rethrown with epoch/step context.
TrainResult train_run(const TrainConfig& tcfg, const VitConfig& mcfg, const Dataset& train,
                      const Dataset& val, const TrainHooks& hooks = {});

/// Mean cross-entropy and gradient for a batch of token sequences; exposed for
/// single-step tests.
template <class T>
double batch_loss_and_grads(std::span<const TokenBatch> tokens,
                            std::span<const std::vector<double>> targets, const VitConfig& cfg,
                            const VitParams<T>& params, VitParams<T>* grads);

}  // namespace randvit
