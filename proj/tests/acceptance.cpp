// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Optional arguments select criteria by number.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "randvit/analysis.hpp"
#include "randvit/config.hpp"
#include "randvit/error.hpp"
#include "randvit/model.hpp"
#include "randvit/posenc.hpp"
#include "randvit/sampling.hpp"
#include "randvit/train.hpp"

using namespace randvit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / ("randvit_accept_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RANDVIT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double last_top1(const fs::path& metrics) {
  std::istringstream in(slurp(metrics));
  std::string line;
  std::string last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  std::vector<std::string> f;
  std::stringstream ls(last);
  for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
  if (f.size() != 5) throw Error(ErrorKind::Io, "malformed metrics " + metrics.string());
  return std::stod(f[3]);
}

// 1 -------------------------------------------------------------------------
Outcome flops_reproduction() {
  const auto t0 = Clock::now();
  const VitConfig cfg = VitConfig::vit_s16();
  const std::pair<int, double> table[] = {{196, 4.6}, {392, 9.9}, {588, 15.9}, {784, 22.6}};
  Outcome o;
  for (const auto& [n, expected] : table) {
    const double g = count_flops(cfg, n).gflops();
    o.pass &= std::abs(g - expected) <= 0.05 * expected;
    o.detail += fmt("n=%d %.3f (%.1f) ", n, g, expected);
  }
  const double t = seconds_since(t0);
  o.pass &= t < 1.0;
  o.detail += fmt("in %.4fs", t);
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome grid_equivalence() {
  RandomStream rng(202);
  int exact = 0;
  for (int i = 0; i < 100; ++i) {
    const int c = 1 + static_cast<int>(rng.below(3));
    const int p = 2 + static_cast<int>(rng.below(7));
    const int gh = 1 + static_cast<int>(rng.below(6));
    const int gw = 1 + static_cast<int>(rng.below(6));
    const auto img = oracle::random_image(c, gh * p, gw * p, rng);
    const auto tokens = extract_patches(img, grid_coords(PatchGeometry(gh * p, gw * p, p)), p);
    exact += tokens.pixels == oracle::slice_patches(img, p);
  }

  VitConfig grid = VitConfig::desk();
  grid.dim = 32;
  grid.depth = 2;
  VitConfig mode_b = grid;
  mode_b.mode = Mode::B;
  mode_b.r = 2.5;
  const auto params = init_params<float>(grid, 7);
  int bitmatch = 0;
  for (int i = 0; i < 10; ++i) {
    const auto img = oracle::random_image(1, 64, 64, rng);
    RandomStream s(static_cast<std::uint64_t>(1000 + i));
    const auto lb = forward<float>(img, mode_b, params, Phase::Eval, s).logits;
    TokenBatch manual;
    manual.n_tokens = 64;
    manual.channels = 1;
    manual.patch = grid.patch;
    manual.pixels = oracle::slice_patches(img, grid.patch);
    manual.coords = grid_coords(grid.geometry());
    attach_encoding(manual, grid.posenc());
    bitmatch += forward_tokens<float>(manual, grid, params, false).logits == lb;
  }
  return {exact == 100 && bitmatch == 10,
          fmt("%d/100 images element-exact, %d/10 Mode B logits bit-identical to sliced grid", exact, bitmatch)};
}

// 3 -------------------------------------------------------------------------
struct GradCheck {
  int points = 0;
  double worst = 0.0;
};

GradCheck gradient_points(const VitConfig& cfg, std::uint64_t seed, int n_points) {
  auto params = init_params<double>(cfg, seed);
  RandomStream rng(seed + 1);
  for (auto& t : params.tensors()) {
    for (auto& v : t.data) v += 0.3 * rng.normal();
  }
  std::vector<TokenBatch> tokens;
  std::vector<std::vector<double>> targets;
  for (int i = 0; i < 3; ++i) {
    const auto img = oracle::random_image(cfg.channels, cfg.image_height, cfg.image_width, rng);
    tokens.push_back(tokenize(img, cfg, Phase::Train, rng));
    targets.push_back(one_hot(i % cfg.n_classes, cfg.n_classes));
  }
  auto grads = params.like();
  batch_loss_and_grads<double>(tokens, targets, cfg, params, &grads);
  GradCheck out;
  const double h = 1e-5;
  while (out.points < n_points) {
    const auto t = static_cast<std::size_t>(rng.below(params.size()));
    const auto i = static_cast<std::size_t>(rng.below(params[t].data.size()));
    const double old = params[t].data[i];
    params[t].data[i] = old + h;
    const double lp = batch_loss_and_grads<double>(tokens, targets, cfg, params, nullptr);
    params[t].data[i] = old - h;
    const double lm = batch_loss_and_grads<double>(tokens, targets, cfg, params, nullptr);
    params[t].data[i] = old;
    const double fd = (lp - lm) / (2 * h);
    const double an = grads[t].data[i];
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
    out.worst = std::max(out.worst, rel);
    ++out.points;
  }
  return out;
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  VitConfig grid = VitConfig::preset("tiny");
  VitConfig random = grid;
  random.mode = Mode::A;
  random.r = 1.5;
  const auto g = gradient_points(grid, 31, 40);
  const auto r = gradient_points(random, 32, 40);
  const double t = seconds_since(t0);
  return {g.worst < 1e-3 && r.worst < 1e-3 && t < 120.0,
          fmt("grid %d points worst rel %.2e, random %d points worst rel %.2e, %.1fs", g.points, g.worst, r.points,
              r.worst, t)};
}

// 4 -------------------------------------------------------------------------
Outcome sampler_statistics() {
  const PatchGeometry geom(224, 160, 16);  // rows_max 13, cols_max 9, L 140
  const double r = 100000.0 / geom.base_length();
  RandomStream rng(404);
  const auto coords = random_coords(geom, SamplingFactor(r), rng);
  const double n = static_cast<double>(coords.size());
  Outcome o;
  o.pass = coords.size() == 100000;
  auto check_axis = [&](const char* name, double a, auto get) {
    double mean = 0.0;
    for (const auto& z : coords.coords) mean += get(z);
    mean /= n;
    double var = 0.0;
    for (const auto& z : coords.coords) var += (get(z) - mean) * (get(z) - mean);
    var /= n - 1;
    // U(0, a): mean a/2, variance a^2/12, Var[s^2] ~ (mu4 - sigma^4)/n = a^4/180/n.
    const double se_mean = std::sqrt(a * a / 12.0 / n);
    const double se_var = std::sqrt(a * a * a * a / 180.0 / n);
    const double zm = (mean - a / 2) / se_mean;
    const double zv = (var - a * a / 12) / se_var;
    o.pass &= std::abs(zm) < 3.0 && std::abs(zv) < 3.0;
    o.detail += fmt("%s mean %.4f (%.2f SE) var %.4f (%.2f SE); ", name, mean, zm, var, zv);
  };
  check_axis("z0", geom.rows_max(), [](const PatchCoord& z) { return z.row; });
  check_axis("z1", geom.cols_max(), [](const PatchCoord& z) { return z.col; });

  const PatchGeometry s16(224, 224, 16);
  std::string counts;
  for (double rr : {0.5, 1.0, 2.0, 3.0, 4.0}) {
    const auto c = random_coords(s16, SamplingFactor(rr), rng);
    const auto expected = static_cast<std::size_t>(std::llround(rr * 196));
    o.pass &= c.size() == expected;
    counts += fmt("%zu ", c.size());
  }
  o.detail += "counts " + counts;
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome rollout_properties() {
  RandomStream rng(505);
  const int n = 20;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    ForwardTrace trace;
    trace.n_tokens = n;
    for (int b = 0; b < 6; ++b) {
      std::vector<std::vector<double>> heads;
      for (int h = 0; h < 4; ++h) {
        std::vector<double> a(n * n);
        for (int i = 0; i < n; ++i) {
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += (a[i * n + j] = std::exp(3.0 * rng.normal()));
          for (int j = 0; j < n; ++j) a[i * n + j] /= s;
        }
        heads.push_back(a);
      }
      trace.attention.push_back(heads);
    }
    for (const auto& p : rollout_products(trace).products) {
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += p[i * n + j];
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
  }

  const PatchGeometry geom(32, 32, 8);
  ForwardTrace identity;
  identity.n_tokens = 16;
  for (int b = 0; b < 6; ++b) {
    std::vector<double> eye(16 * 16, 0.0);
    for (int i = 0; i < 16; ++i) eye[i * 16 + i] = 1.0;
    identity.attention.push_back({eye, eye});
  }
  const auto hm = render_heatmap(attention_rollout(identity), grid_coords(geom), geom, Mode::Grid);
  const auto [lo, hi] = std::minmax_element(hm.values.begin(), hm.values.end());
  const bool uniform = *lo == *hi;
  return {worst < 1e-5 && uniform,
          fmt("max |row sum - 1| %.1e over 10 depth-6 traces; identity heatmap %s (%.3f..%.3f)", worst,
              uniform ? "uniform" : "not uniform", *lo, *hi)};
}

// 6 -------------------------------------------------------------------------
Outcome desk_trend() {
  const auto t0 = Clock::now();
  const fs::path dir = scratch_dir() / "trend";
  const std::string cfg = std::string(RANDVIT_SOURCE_DIR) + "/configs/glyph-trend.cfg";
  std::vector<double> base;
  std::vector<double> mode_a;
  for (int seed = 0; seed < 3; ++seed) {
    for (const bool random : {false, true}) {
      const fs::path out = dir / fmt("%s_seed%d", random ? "A_r2" : "grid", seed);
      const std::string args = "train --config " + cfg + " --seed " + std::to_string(seed) +
                               (random ? " --mode A --r 2" : " --mode grid") + " --out " + out.string();
      const int code = run_cli(args, dir.parent_path() / "trend.log");
      if (code != 0) {
        return {false, fmt("train exited %d: %s", code, slurp(dir.parent_path() / "trend.log").c_str())};
      }
      const double top1 = last_top1(out / "metrics.csv");
      (random ? mode_a : base).push_back(top1);
      std::fprintf(stderr, "  criterion 6: seed %d %s val_top1 %.2f (%.0fs elapsed)\n", seed,
                   random ? "Mode A r=2" : "grid", top1, seconds_since(t0));
    }
  }
  auto mean = [](const std::vector<double>& v) { return (v[0] + v[1] + v[2]) / 3.0; };
  const double mb = mean(base);
  const double ma = mean(mode_a);
  const double t = seconds_since(t0);
  fs::remove_all(dir);
  return {mb >= 80.0 && ma >= mb - 1.0 && t < 1800.0,
          fmt("grid %.1f/%.1f/%.1f mean %.2f; Mode A r=2 %.1f/%.1f/%.1f mean %.2f (diff %+.2f); %.0fs", base[0],
              base[1], base[2], mb, mode_a[0], mode_a[1], mode_a[2], ma, ma - mb, t)};
}

// 7 -------------------------------------------------------------------------
Outcome schedule_optimizer() {
  TrainConfig cfg;
  cfg.lr = 0.0007;
  const std::int64_t total = 10000;
  const std::int64_t w = warmup_steps(total, cfg);
  const bool lr_ok = w == 444 && lr_at(0, total, cfg) == 0.0 && lr_at(w, total, cfg) == cfg.lr &&
                     std::abs(lr_at(total, total, cfg)) < 1e-12 && lr_at(222, total, cfg) == 0.00035;

  TrainConfig adam_cfg;
  adam_cfg.weight_decay = 0.0;
  ParamStore<double> p;
  p.add("theta", {1}, 1.0);
  auto grads = p.like();
  auto state = make_adam_state(p);
  for (int s = 0; s < 500; ++s) {
    grads[0].data[0] = 2.0 * p[0].data[0];
    adam_step(p, grads, state, 0.01, adam_cfg);
  }
  const double theta = p[0].data[0];

  RandomStream rng(707);
  std::vector<ImageTensor> images;
  std::vector<std::vector<double>> targets;
  for (int i = 0; i < 32; ++i) {
    images.push_back(oracle::random_image(1, 4, 4, rng));
    targets.push_back(one_hot(i % 5, 5));
  }
  int bad_sums = 0;
  for (int rep = 0; rep < 100; ++rep) {
    for (const auto& t : mixup(images, targets, rng, 0.2).targets) {
      double s = 0.0;
      for (double v : t) s += v;
      bad_sums += s != 1.0;
    }
  }
  return {lr_ok && std::abs(theta) < 0.05 && bad_sums == 0,
          fmt("lr_at examples %s; adam |theta| after 500 steps %.2e; %d/3200 mixup label sums != 1",
              lr_ok ? "exact" : "WRONG", std::abs(theta), bad_sums)};
}

// 8 -------------------------------------------------------------------------
Outcome determinism() {
  const fs::path dir = scratch_dir() / "determinism";
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  {
    std::ofstream f(cfg);
    f << "model.dim = 32\nmodel.depth = 2\nrun.mode = A\nrun.r = 1.5\nrun.eval_draws = 2\n"
         "train.epochs = 2\ntrain.batch_size = 16\ntrain.mixup_alpha = 0.2\n"
         "data.n_train = 100\ndata.n_val = 50\n";
  }
  const fs::path out = dir / "run";
  const fs::path log = dir / "log";
  if (run_cli("train --config " + cfg.string() + " --out " + out.string(), log) != 0) {
    return {false, "first run failed: " + slurp(log)};
  }
  const std::string manifest = slurp(out / "manifest");
  const std::string metrics = slurp(out / "metrics.csv");
  const std::string checkpoint = slurp(out / "checkpoint");
  fs::copy_file(out / "manifest", dir / "manifest");
  if (run_cli("train --config " + (dir / "manifest").string(), log) != 0) {
    return {false, "second run failed: " + slurp(log)};
  }
  const bool same_manifest = slurp(out / "manifest") == manifest;
  const bool same_metrics = slurp(out / "metrics.csv") == metrics;
  const bool same_ckpt = slurp(out / "checkpoint") == checkpoint;
  fs::remove_all(dir);
  return {same_manifest && same_metrics && same_ckpt && !metrics.empty() && !checkpoint.empty(),
          fmt("manifest %s, metrics.csv %s, checkpoint %s (%zu bytes)", same_manifest ? "identical" : "DIFFERENT",
              same_metrics ? "identical" : "DIFFERENT", same_ckpt ? "identical" : "DIFFERENT", checkpoint.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"FLOPs reproduction", flops_reproduction},
      {"grid equivalence", grid_equivalence},
      {"gradient checks", gradient_checks},
      {"sampler statistics", sampler_statistics},
      {"rollout properties", rollout_properties},
      {"desk-scale trend", desk_trend},
      {"schedule/optimizer units", schedule_optimizer},
      {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(scratch_dir());
  return failed == 0 ? 0 : 1;
}
