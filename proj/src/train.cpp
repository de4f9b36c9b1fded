// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include "randvit/error.hpp"

namespace randvit {

const char* to_string(WeightDecayMode mode) {
  return mode == WeightDecayMode::Decoupled ? "decoupled" : "l2";
}

WeightDecayMode parse_weight_decay_mode(const std::string& s) {
  if (s == "decoupled") return WeightDecayMode::Decoupled;
  if (s == "l2") return WeightDecayMode::L2;
  throw Error(ErrorKind::BadConfig, "train.decay must be 'decoupled' or 'l2', got '" + s + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw Error(ErrorKind::BadConfig, key + " " + why);
  };
  if (epochs < 1) fail("train.epochs", "must be >= 1");
  if (batch_size < 1) fail("train.batch_size", "must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("train.lr", "must be a finite non-negative number");
  if (!(weight_decay >= 0.0)) fail("train.weight_decay", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("train.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("train.beta2", "must lie in [0, 1)");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
    fail("train.warmup_fraction", "must lie in (0, 1)");
  }
  if (!(mixup_alpha >= 0.0)) fail("train.mixup_alpha", "must be >= 0");
  if (eval_draws < 1) fail("run.eval_draws", "must be >= 1");
}

std::int64_t warmup_steps(std::int64_t total_steps, const TrainConfig& cfg) {
  return std::llround(cfg.warmup_fraction * static_cast<double>(total_steps));
}

double lr_at(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg) {
  const std::int64_t w = warmup_steps(total_steps, cfg);
  if (step < w) return cfg.lr * (static_cast<double>(step) / static_cast<double>(w));
  if (total_steps <= w) return cfg.lr;
  const double progress =
      static_cast<double>(step - w) / static_cast<double>(total_steps - w);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <class T>
void adam_step(ParamStore<T>& params, const ParamStore<T>& grads, AdamState<T>& state, double lr,
               const TrainConfig& cfg) {
  for (const auto& g : grads.tensors()) {
    for (T v : g.data) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw Error(ErrorKind::NonFiniteGradient, "non-finite gradient in " + g.name);
      }
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const bool l2 = cfg.decay == WeightDecayMode::L2;
  const T wd = static_cast<T>(cfg.weight_decay);

  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t].data;
    const auto& g = grads[t].data;
    auto& m = state.m[t].data;
    auto& v = state.v[t].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T gi = l2 ? g[i] + wd * p[i] : g[i];
      m[i] = b1 * m[i] + (T(1) - b1) * gi;
      v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double update = mhat / (std::sqrt(vhat) + cfg.adam_eps);
      if (!l2) update += cfg.weight_decay * p[i];
      p[i] = static_cast<T>(p[i] - lr * update);
    }
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> one_hot(int label, int n_classes) {
  std::vector<double> t(static_cast<std::size_t>(n_classes), 0.0);
  t.at(static_cast<std::size_t>(label)) = 1.0;
  return t;
}

LossGrad cross_entropy(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size() || logits.empty()) {
    throw Error(ErrorKind::ShapeMismatch, "logits and target differ in length");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double log_z = mx + std::log(sum);

  LossGrad out;
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double log_p = logits[i] - log_z;
    if (target[i] != 0.0) out.loss -= target[i] * log_p;
    out.grad[i] = std::exp(log_p) - target[i];
  }
  return out;
}

ImageTensor blend_images(const ImageTensor& a, const ImageTensor& b, double m) {
  if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width()) {
    throw Error(ErrorKind::ShapeMismatch, "mixup pair differs in shape");
  }
  if (m == 1.0) return a;
  if (m == 0.0) return b;
  ImageTensor out(a.channels(), a.height(), a.width());
  auto dst = out.data();
  auto sa = a.data();
  auto sb = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = m * sa[i] + (1.0 - m) * sb[i];
  return out;
}

std::vector<double> blend_targets(std::span<const double> a, std::span<const double> b, double m) {
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "mixup targets differ in length");
  std::vector<double> out(a.size());
  if (m == 1.0) return {a.begin(), a.end()};
  if (m == 0.0) return {b.begin(), b.end()};
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = m * a[i] + (1.0 - m) * b[i];
  return out;
}

MixupBatch mixup(std::span<const ImageTensor> images, std::span<const std::vector<double>> targets,
                 RandomStream& rng, double alpha) {
  if (images.size() != targets.size()) {
    throw Error(ErrorKind::ShapeMismatch, "mixup needs one target per image");
  }
  if (!(alpha > 0.0)) throw Error(ErrorKind::BadConfig, "mixup alpha must be > 0");
  const std::size_t n = images.size();
  MixupBatch out;
  out.partner.resize(n);
  std::iota(out.partner.begin(), out.partner.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(out.partner[i - 1], out.partner[rng.below(i)]);
  out.weight.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.weight[i] = rng.beta(alpha, alpha);

  out.images.reserve(n);
  out.targets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = out.partner[i];
    out.images.push_back(blend_images(images[i], images[j], out.weight[i]));
    std::vector<double> t = blend_targets(targets[i], targets[j], out.weight[i]);
    // Renormalise so the label vector sums to exactly 1 in floating point.
    double sum = 0.0;
    for (double v : t) sum += v;
    if (sum != 1.0) {
      const auto big = std::max_element(t.begin(), t.end());
      *big += 1.0 - sum;
    }
    out.targets.push_back(std::move(t));
  }
  return out;
}

void MetricsLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << kHeader << '\n';
  f << std::setprecision(17);
  for (const auto& r : rows) {
    f << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_top1 << ',' << r.lr
      << '\n';
  }
}

void MetricsLog::write_timing_csv(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << "epoch,wall_seconds\n";
  for (const auto& r : rows) f << r.epoch << ',' << r.wall_seconds << '\n';
}

template <class T>
double batch_loss_and_grads(std::span<const TokenBatch> tokens,
                            std::span<const std::vector<double>> targets, const VitConfig& cfg,
                            const VitParams<T>& params, VitParams<T>* grads) {
  const BatchForward<T> fwd = forward_batch<T>(tokens, cfg, params);
  const auto batch = static_cast<Eigen::Index>(tokens.size());
  Matrix<T> dlogits(batch, cfg.n_classes);
  double loss = 0.0;
  std::vector<double> z(static_cast<std::size_t>(cfg.n_classes));
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int k = 0; k < cfg.n_classes; ++k) z[k] = static_cast<double>(fwd.logits(b, k));
    const LossGrad lg = cross_entropy(z, targets[static_cast<std::size_t>(b)]);
    loss += lg.loss;
    for (int k = 0; k < cfg.n_classes; ++k) dlogits(b, k) = static_cast<T>(lg.grad[k] / batch);
  }
  if (grads) backward_batch<T>(fwd, dlogits, cfg, params, *grads);
  return loss / static_cast<double>(batch);
}

template <class T>
EvalResult evaluate(const VitConfig& cfg, const VitParams<T>& params, const Dataset& split,
                    std::uint64_t eval_seed, int draws, int batch_size) {
  if (split.empty()) throw Error(ErrorKind::EmptySplit, "evaluation split has no images");
  if (draws < 1) draws = 1;
  if (cfg.sampler(Phase::Eval) == SamplerKind::Grid) draws = 1;
  const std::size_t n = split.size();
  const auto k = static_cast<std::size_t>(cfg.n_classes);
  std::vector<double> logits(n * k, 0.0);

  for (int d = 0; d < draws; ++d) {
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
      std::vector<TokenBatch> tokens;
      tokens.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        RandomStream rng = RandomStream::derive(eval_seed, "eval", {std::uint64_t(d), i});
        tokens.push_back(tokenize(split.images[i], cfg, Phase::Eval, rng));
      }
      const BatchForward<T> fwd = forward_batch<T>(tokens, cfg, params);
      for (std::size_t i = start; i < end; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
          logits[i * k + c] += static_cast<double>(fwd.logits(static_cast<Eigen::Index>(i - start),
                                                               static_cast<Eigen::Index>(c)));
        }
      }
    }
  }

  EvalResult res;
  res.count = n;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> z(logits.data() + i * k, k);
    for (double& v : z) v /= draws;
    const auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (best == split.labels[i]) ++correct;
    loss += cross_entropy(z, one_hot(split.labels[i], cfg.n_classes)).loss;
  }
  res.top1 = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
  res.mean_loss = loss / static_cast<double>(n);
  return res;
}

TrainResult train_run(const TrainConfig& tcfg, const VitConfig& mcfg, const Dataset& train,
                      const Dataset& val, const TrainHooks& hooks) {
  tcfg.validate();
  mcfg.validate();
  train.validate();
  val.validate();
  if (train.empty()) throw Error(ErrorKind::EmptySplit, "training split has no images");
  if (val.empty()) throw Error(ErrorKind::EmptySplit, "validation split has no images");
  if (train.n_classes > mcfg.n_classes) {
    throw Error(ErrorKind::SchemaMismatch, "dataset has more classes than the model head");
  }

  TrainResult result;
  result.params = init_params<float>(mcfg, RandomStream::derive(tcfg.seed, "params").next_u64());
  AdamState<float> adam = make_adam_state(result.params);
  VitParams<float> grads = result.params.like();

  const std::size_t n = train.size();
  const auto bs = static_cast<std::size_t>(tcfg.batch_size);
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + bs - 1) / bs);
  const std::int64_t total_steps = steps_per_epoch * tcfg.epochs;
  std::int64_t step = 0;
  std::vector<std::size_t> order(n);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream shuffle = RandomStream::derive(tcfg.seed, "shuffle", {std::uint64_t(epoch)});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::int64_t bi = 0; bi < steps_per_epoch; ++bi, ++step) {
      const std::size_t start = static_cast<std::size_t>(bi) * bs;
      const std::size_t end = std::min(n, start + bs);
      std::vector<ImageTensor> images;
      std::vector<std::vector<double>> targets;
      for (std::size_t i = start; i < end; ++i) {
        images.push_back(train.images[order[i]]);
        targets.push_back(one_hot(train.labels[order[i]], mcfg.n_classes));
      }
      if (tcfg.mixup_alpha > 0.0) {
        RandomStream mrng = RandomStream::derive(tcfg.seed, "mixup",
                                                 {std::uint64_t(epoch), std::uint64_t(bi)});
        MixupBatch mixed = mixup(images, targets, mrng, tcfg.mixup_alpha);
        images = std::move(mixed.images);
        targets = std::move(mixed.targets);
      }
      std::vector<TokenBatch> tokens;
      tokens.reserve(images.size());
      for (std::size_t j = 0; j < images.size(); ++j) {
        const std::initializer_list<std::uint64_t> idx = {std::uint64_t(epoch), std::uint64_t(bi), j};
        if (hooks.augment) {
          RandomStream arng = RandomStream::derive(tcfg.seed, "augment", idx);
          hooks.augment(images[j], arng);
        }
        RandomStream srng = RandomStream::derive(tcfg.seed, "sample", idx);
        tokens.push_back(tokenize(images[j], mcfg, Phase::Train, srng));
      }

      grads.fill(0.0f);
      const double loss = batch_loss_and_grads<float>(tokens, targets, mcfg, result.params, &grads);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::NonFiniteGradient, "non-finite loss at epoch " +
                                                      std::to_string(epoch) + ", step " +
                                                      std::to_string(step));
      }
      loss_sum += loss * static_cast<double>(images.size());
      lr = lr_at(step, total_steps, tcfg);
      try {
        adam_step(result.params, grads, adam, lr, tcfg);
      } catch (const Error& e) {
        throw Error(e.kind(), std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                  ", step " + std::to_string(step));
      }
    }

    const EvalResult ev = evaluate<float>(mcfg, result.params, val, tcfg.eval_seed, tcfg.eval_draws,
                                          tcfg.batch_size);
    EpochMetrics row;
    row.epoch = epoch + 1;
    row.train_loss = loss_sum / static_cast<double>(n);
    row.val_loss = ev.mean_loss;
    row.val_top1 = ev.top1;
    row.lr = lr;
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.rows.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
  }
  result.steps = step;
  return result;
}

template void adam_step<float>(ParamStore<float>&, const ParamStore<float>&, AdamState<float>&,
                               double, const TrainConfig&);
template void adam_step<double>(ParamStore<double>&, const ParamStore<double>&,
                                AdamState<double>&, double, const TrainConfig&);
template EvalResult evaluate<float>(const VitConfig&, const VitParams<float>&, const Dataset&,
                                    std::uint64_t, int, int);
template EvalResult evaluate<double>(const VitConfig&, const VitParams<double>&, const Dataset&,
                                     std::uint64_t, int, int);
template double batch_loss_and_grads<float>(std::span<const TokenBatch>,
                                            std::span<const std::vector<double>>,
                                            const VitConfig&, const VitParams<float>&,
                                            VitParams<float>*);
template double batch_loss_and_grads<double>(std::span<const TokenBatch>,
                                             std::span<const std::vector<double>>,
                                             const VitConfig&, const VitParams<double>&,
                                             VitParams<double>*);

}  // namespace randvit
