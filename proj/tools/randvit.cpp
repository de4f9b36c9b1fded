// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// randvit: train / evaluate / flops / attnmap / sample-demo / sweep.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "randvit/analysis.hpp"
#include "randvit/checkpoint.hpp"
#include "randvit/config.hpp"
#include "randvit/data.hpp"
#include "randvit/error.hpp"
#include "randvit/image_io.hpp"
#include "randvit/train.hpp"

namespace fs = std::filesystem;
using namespace randvit;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::string mode;
  std::string r;
  std::string seed;
  std::string epochs;
  std::string out;
  std::string eval_draws;
  std::string rollout_reduce;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "Run configuration file (key = value)");
  app->add_option("--set", o.sets, "Override one key, e.g. --set train.lr=0.003 (repeatable)");
  app->add_option("--mode", o.mode, "Tokenization mode: grid, A or B");
  app->add_option("--r", o.r, "Sampling factor r");
  app->add_option("--seed", o.seed, "Run seed");
  app->add_option("--epochs", o.epochs, "Training epochs");
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--eval-draws", o.eval_draws, "Random tokenizations averaged per image in Mode A evaluation");
  app->add_option("--rollout-reduce", o.rollout_reduce, "Rollout token score: col-mean or row-of-mean");
}

/// File, then --set, then the dedicated flags.
KeyValueConfig merged_config(const CommonOptions& o, KeyValueConfig base = {}) {
  if (!o.config.empty()) {
    const KeyValueConfig file = KeyValueConfig::load(o.config);
    for (const auto& [k, v] : file.entries()) base.set(k, v);
  }
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::BadConfig, "--set expects key=value, got '" + s + "'");
    }
    base.set(s.substr(0, eq), s.substr(eq + 1));
  }
  const std::pair<const std::string*, const char*> flags[] = {
      {&o.mode, "run.mode"},       {&o.r, "run.r"},     {&o.seed, "run.seed"},
      {&o.epochs, "train.epochs"}, {&o.out, "run.out"}, {&o.eval_draws, "run.eval_draws"},
      {&o.rollout_reduce, "run.rollout_reduce"},
  };
  for (const auto& [value, key] : flags) {
    if (!value->empty()) base.set(key, *value);
  }
  return base;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << text;
}

std::string manifest_text(const RunConfig& rc) {
  std::ostringstream s;
  s << "# randvit run manifest\n"
    << "# tool_version = " << kToolVersion << "\n"
    << "# layout = manifest metrics.csv timing.csv checkpoint heatmaps/\n"
    << "# seeds: run.seed drives init/shuffle/mixup/sampling, run.eval_seed drives\n"
    << "# random evaluation tokens, data.seed (and data.seed + 1) the synthetic splits.\n"
    << rc.to_kv().to_text();
  return s.str();
}

struct RunOutcome {
  TrainResult result;
  double seconds = 0.0;
};

RunOutcome run_training(const RunConfig& rc, const Dataset& train, const Dataset& val,
                        const fs::path& out, bool verbose) {
  fs::create_directories(out);
  write_text(out / "manifest", manifest_text(rc));

  TrainHooks hooks;
  if (verbose) {
    hooks.on_epoch = [&](const EpochMetrics& m) {
      std::printf("epoch %d/%d  train_loss %.4f  val_loss %.4f  val_top1 %.2f  lr %.3g  (%.1fs)\n",
                  m.epoch, rc.train.epochs, m.train_loss, m.val_loss, m.val_top1, m.lr,
                  m.wall_seconds);
      std::fflush(stdout);
    };
  }
  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome outcome;
  outcome.result = train_run(rc.train, rc.model, train, val, hooks);
  outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  outcome.result.log.write_csv(out / "metrics.csv");
  outcome.result.log.write_timing_csv(out / "timing.csv");
  Checkpoint ck;
  ck.config_text = rc.to_kv().to_text();
  ck.seed = rc.train.seed;
  ck.steps = outcome.result.steps;
  ck.params = outcome.result.params;
  save_checkpoint(out / "checkpoint", ck);
  return outcome;
}

int cmd_train(const CommonOptions& o) {
  RunConfig rc = RunConfig::from(merged_config(o));
  auto [train, val] = load_datasets(rc);
  rc.model.validate();
  rc.train.validate();
  const fs::path out = rc.out_dir;
  std::printf("training %s model (mode %s, r=%s) on %zu/%zu images -> %s\n", rc.model_preset.c_str(),
              to_string(rc.model.mode), format_double(rc.model.r).c_str(), train.size(), val.size(),
              out.string().c_str());
  const auto outcome = run_training(rc, train, val, out, true);
  const auto& last = outcome.result.log.rows.back();
  std::printf("done in %.1fs: val_top1 %.2f  val_loss %.4f\n", outcome.seconds, last.val_top1, last.val_loss);
  return 0;
}

/// Checkpoint config, then file / --set / flags on top.
RunConfig config_from_checkpoint(const Checkpoint& ck, const CommonOptions& o) {
  RunConfig rc = RunConfig::from(merged_config(o, KeyValueConfig::parse(ck.config_text, "checkpoint")));
  check_params(rc.model, ck.params);
  return rc;
}

int cmd_evaluate(const CommonOptions& o, const std::string& checkpoint_path, const std::string& eval_seed) {
  const fs::path ck_path = checkpoint_path.empty() ? fs::path(RunConfig::from(merged_config(o)).out_dir) / "checkpoint"
                                                   : fs::path(checkpoint_path);
  const Checkpoint ck = load_checkpoint(ck_path);
  RunConfig rc = config_from_checkpoint(ck, o);
  if (!eval_seed.empty()) rc.train.eval_seed = std::stoull(eval_seed);
  auto [train, val] = load_datasets(rc);
  check_params(rc.model, ck.params);
  const auto res = evaluate<float>(rc.model, ck.params, val, rc.train.eval_seed, rc.train.eval_draws,
                                   rc.train.batch_size);
  std::printf("mode %s  r %s  eval_seed %llu  draws %d\n", to_string(rc.model.mode),
              format_double(rc.model.r).c_str(), static_cast<unsigned long long>(rc.train.eval_seed),
              rc.model.sampler(Phase::Eval) == SamplerKind::Grid ? 1 : rc.train.eval_draws);
  std::printf("val_top1 %.2f  val_loss %.6f  images %zu\n", res.top1, res.mean_loss, res.count);
  return 0;
}

int cmd_flops(const CommonOptions& o, const std::string& preset, long long n_tokens, double per_mac) {
  KeyValueConfig kv = merged_config(o);
  if (!preset.empty()) kv.set("model.preset", preset);
  RunConfig rc = RunConfig::from(kv);
  rc.model.validate();
  std::int64_t n = 0;
  if (n_tokens >= 0) {
    n = n_tokens;
  } else if (!o.r.empty() && o.mode.empty()) {
    n = SamplingFactor(rc.model.r).token_count(rc.model.geometry().base_length());
  } else {
    n = rc.model.sequence_length(Phase::Eval);
  }
  const auto rep = count_flops(rc.model, n, per_mac);
  std::printf("preset %s\n", rc.model_preset.c_str());
  std::printf("n_tokens %lld\n", static_cast<long long>(rep.n_tokens));
  std::printf("embed %.0f\n", rep.embed);
  std::printf("attention_per_block %.0f\n", rep.attention);
  std::printf("mlp_per_block %.0f\n", rep.mlp);
  std::printf("head %.0f\n", rep.head);
  std::printf("depth %d\n", rep.depth);
  std::printf("total %.0f\n", rep.total);
  std::printf("gflops %.4f\n", rep.gflops());
  return 0;
}

/// Converts channel count by averaging or replication.
ImageTensor match_channels(const ImageTensor& img, int channels) {
  if (img.channels() == channels) return img;
  ImageTensor out(channels, img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double mean = 0.0;
      for (int c = 0; c < img.channels(); ++c) mean += img.at(c, y, x);
      mean /= img.channels();
      for (int c = 0; c < channels; ++c) out.at(c, y, x) = mean;
    }
  }
  return out;
}

ImageTensor demo_image(const std::string& path, int index) {
  if (!path.empty()) return read_pnm(path);
  const auto ds = synth_glyphs(static_cast<std::size_t>(std::max(index + 1, 5)), 99);
  return ds.images[static_cast<std::size_t>(index)];
}

int cmd_attnmap(const CommonOptions& o, const std::string& checkpoint_path, const std::string& image_path,
                int index, const std::string& modes_arg) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const RunConfig rc = config_from_checkpoint(ck, o);
  const ImageTensor original = demo_image(image_path, index);
  ImageTensor input = match_channels(original, rc.model.channels);
  input = resize_bilinear(input, rc.model.image_height, rc.model.image_width);

  std::vector<Mode> modes;
  if (!o.mode.empty()) {
    modes.push_back(rc.model.mode);
  } else {
    std::stringstream ss(modes_arg);
    for (std::string m; std::getline(ss, m, ',');) {
      if (!m.empty()) modes.push_back(parse_mode(m));
    }
  }
  const fs::path dir = fs::path(rc.out_dir) / "heatmaps";
  fs::create_directories(dir);
  write_pnm(dir / "input.pgm", match_channels(original, original.channels() == 3 ? 3 : 1));

  for (Mode m : modes) {
    VitConfig cfg = rc.model;
    cfg.mode = m;
    RandomStream rng = RandomStream::derive(rc.train.seed, "attnmap");
    const ForwardTrace trace = forward<float>(input, cfg, ck.params, Phase::Eval, rng);
    const auto scores = attention_rollout(trace, rc.rollout);
    Heatmap hm = render_heatmap(scores, trace.coords, cfg.geometry(), m);
    ImageTensor map(1, hm.height, hm.width, hm.values);
    map = resize_bilinear(map, original.height(), original.width());
    std::vector<double> values(map.data().begin(), map.data().end());
    for (double& v : values) v = std::clamp(v, 0.0, 1.0);

    std::string name = to_string(m);
    if (cfg.sampler(Phase::Eval) == SamplerKind::Random) name += "_seed" + std::to_string(rc.train.seed);
    const fs::path file = dir / (name + ".pgm");
    write_unit_pgm(file, values, original.height(), original.width());
    std::printf("%s: %d tokens, predicted class %d -> %s\n", to_string(m), trace.n_tokens,
                static_cast<int>(std::max_element(trace.logits.begin(), trace.logits.end()) -
                                 trace.logits.begin()),
                file.string().c_str());
  }
  return 0;
}

int cmd_sample_demo(const CommonOptions& o, const std::string& image_path, int index, int patch) {
  const RunConfig rc = RunConfig::from(merged_config(o));
  const ImageTensor img = demo_image(image_path, index);
  const int p = patch > 0 ? patch : rc.model.patch;
  const PatchGeometry geom(img.height(), img.width(), p);
  RandomStream rng = RandomStream::derive(rc.train.seed, "sample-demo");
  const PatchCoords random = random_coords(geom, SamplingFactor(rc.model.r), rng);

  const int gap = 4;
  RgbCanvas canvas(img.height(), 2 * img.width() + gap);
  canvas.paste(img, 0);
  canvas.paste(img, img.width() + gap);
  if (geom.divisible()) {
    for (const auto& z : grid_coords(geom).coords) canvas.outline(z.row * p, z.col * p, p, {0, 200, 0});
  } else {
    std::fprintf(stderr, "warning: %dx%d is not divisible by P=%d; grid panel left blank\n",
                 img.height(), img.width(), p);
  }
  for (const auto& z : random.coords) {
    canvas.outline(z.row * p, img.width() + gap + z.col * p, p, {230, 30, 30});
  }

  const fs::path out = rc.out_dir;
  fs::create_directories(out);
  canvas.write_ppm(out / "sample_demo.ppm");
  std::ofstream csv(out / "sample_coords.csv");
  if (!csv) throw Error(ErrorKind::Io, "cannot write " + (out / "sample_coords.csv").string());
  csv << "index,z0,z1,top,left\n" << std::setprecision(17);
  for (std::size_t i = 0; i < random.size(); ++i) {
    const auto& z = random.coords[i];
    csv << i << ',' << z.row << ',' << z.col << ',' << z.row * p << ',' << z.col * p << '\n';
  }
  std::printf("%zu random tokens (r=%s, L=%s, P=%d) -> %s\n", random.size(), format_double(rc.model.r).c_str(),
              format_double(geom.base_length()).c_str(), p, (out / "sample_demo.ppm").string().c_str());
  return 0;
}

struct SweepCell {
  std::string name;
  Mode mode = Mode::Grid;
  double r = 1.0;
  double top1 = std::nan("");
  double gflops = std::nan("");
  std::string status = "ok";
};

std::vector<double> parse_r_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    KeyValueConfig kv;
    kv.set("run.r", item);
    out.push_back(RunConfig::from(kv).model.r);
    SamplingFactor check(out.back());
  }
  return out;
}

std::string csv_number(double v) { return std::isnan(v) ? "" : format_double(v); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

int cmd_sweep(const CommonOptions& o, const std::string& r_list, const std::string& modes_arg) {
  RunConfig base = RunConfig::from(merged_config(o));
  auto [train, val] = load_datasets(base);
  const std::vector<double> rs = parse_r_list(r_list);
  std::vector<Mode> modes;
  std::stringstream ss(modes_arg);
  for (std::string m; std::getline(ss, m, ',');) {
    if (!m.empty()) modes.push_back(parse_mode(m));
  }

  std::vector<SweepCell> cells;
  cells.push_back({"baseline", Mode::Grid, 1.0});
  for (double r : rs) {
    for (Mode m : modes) {
      if (m == Mode::Grid) continue;
      cells.push_back({std::string(to_string(m)) + "_r" + format_double(r), m, r});
    }
  }

  const fs::path out = base.out_dir;
  fs::create_directories(out);
  write_text(out / "manifest", manifest_text(base));
  for (auto& cell : cells) {
    RunConfig rc = base;
    rc.model.mode = cell.mode;
    rc.model.r = cell.r;
    rc.out_dir = (out / "sweep" / cell.name).string();
    std::printf("[%s] mode %s r %s\n", cell.name.c_str(), to_string(cell.mode), format_double(cell.r).c_str());
    std::fflush(stdout);
    try {
      cell.gflops = count_flops(rc.model, rc.model.sequence_length(Phase::Eval)).gflops();
      const auto outcome = run_training(rc, train, val, rc.out_dir, false);
      cell.top1 = outcome.result.log.rows.back().val_top1;
      std::printf("[%s] val_top1 %.2f  gflops %.4f  (%.1fs)\n", cell.name.c_str(), cell.top1, cell.gflops,
                  outcome.seconds);
    } catch (const std::exception& e) {
      cell.status = std::string("failed: ") + e.what();
      std::fprintf(stderr, "[%s] %s\n", cell.name.c_str(), cell.status.c_str());
    }
  }

  std::ostringstream lng;
  lng << "cell,mode,r,top1,gflops,status\n";
  for (const auto& c : cells) {
    lng << c.name << ',' << to_string(c.mode) << ',' << format_double(c.r) << ',' << csv_number(c.top1) << ','
        << csv_number(c.gflops) << ',' << csv_field(c.status) << '\n';
  }
  write_text(out / "sweep.csv", lng.str());

  // Rows r, columns per-mode accuracy and GFLOPs; baseline first.
  std::ostringstream wide;
  wide << "r,baseline_top1,baseline_gflops";
  for (Mode m : modes) {
    if (m == Mode::Grid) continue;
    wide << ',' << to_string(m) << "_top1," << to_string(m) << "_gflops";
  }
  wide << '\n';
  wide << "-," << csv_number(cells[0].top1) << ',' << csv_number(cells[0].gflops);
  for (Mode m : modes) {
    if (m != Mode::Grid) wide << ",,";
  }
  wide << '\n';
  for (double r : rs) {
    wide << format_double(r) << ",,";
    for (Mode m : modes) {
      if (m == Mode::Grid) continue;
      const auto it = std::find_if(cells.begin(), cells.end(), [&](const SweepCell& c) { return c.mode == m && c.r == r; });
      wide << ',' << csv_number(it->top1) << ',' << csv_number(it->gflops);
    }
    wide << '\n';
  }
  write_text(out / "sweep_table.csv", wide.str());

  std::ostringstream eff;
  eff << "cell,mode,r,top1,gflops,top1_per_gflop\n";
  for (const auto& c : cells) {
    std::string ratio;
    if (!std::isnan(c.top1) && c.gflops > 0.0) ratio = format_double(work_efficiency(c.top1, c.gflops));
    eff << c.name << ',' << to_string(c.mode) << ',' << format_double(c.r) << ',' << csv_number(c.top1) << ','
        << csv_number(c.gflops) << ',' << ratio << '\n';
  }
  write_text(out / "efficiency.csv", eff.str());

  const bool any_failed = std::any_of(cells.begin(), cells.end(), [](const SweepCell& c) { return c.status != "ok"; });
  std::printf("wrote %s, %s, %s\n", (out / "sweep.csv").string().c_str(), (out / "sweep_table.csv").string().c_str(),
              (out / "efficiency.csv").string().c_str());
  return any_failed ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"randvit: vision transformers with grid or random patch sampling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  CommonOptions train_o, eval_o, flops_o, attn_o, demo_o, sweep_o;

  auto* train = app.add_subcommand("train", "Train a model and write manifest, metrics and checkpoint");
  add_common(train, train_o);

  std::string eval_ckpt;
  std::string eval_seed;
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on the validation split");
  add_common(eval, eval_o);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file (default <out>/checkpoint)");
  eval->add_option("--eval-seed", eval_seed, "Seed for random evaluation tokens");

  std::string flops_preset;
  long long flops_n = -1;
  double flops_per_mac = 1.0;
  auto* flops = app.add_subcommand("flops", "Print the inference FLOPs model for a token count");
  add_common(flops, flops_o);
  flops->add_option("--preset", flops_preset, "Model preset: desk, vit-s16, tiny");
  flops->add_option("--n", flops_n, "Token count (overrides --r)");
  flops->add_option("--flops-per-mac", flops_per_mac, "Operations per multiply-accumulate")->check(CLI::PositiveNumber);

  std::string attn_ckpt;
  std::string attn_image;
  int attn_index = 0;
  std::string attn_modes = "grid,A";
  auto* attn = app.add_subcommand("attnmap", "Write attention-rollout heatmaps for one image");
  add_common(attn, attn_o);
  attn->add_option("--checkpoint", attn_ckpt, "Checkpoint file")->required();
  attn->add_option("--image", attn_image, "PGM/PPM image (default: a synthetic glyph)");
  attn->add_option("--index", attn_index, "Synthetic glyph index when no image is given")->check(CLI::NonNegativeNumber);
  attn->add_option("--modes", attn_modes, "Comma-separated modes when --mode is not given");

  std::string demo_image_path;
  int demo_index = 0;
  int demo_patch = 0;
  auto* demo = app.add_subcommand("sample-demo", "Draw grid and random patch outlines side by side");
  add_common(demo, demo_o);
  demo->add_option("--image", demo_image_path, "PGM/PPM image (default: a synthetic glyph)");
  demo->add_option("--index", demo_index, "Synthetic glyph index when no image is given")->check(CLI::NonNegativeNumber);
  demo->add_option("--patch", demo_patch, "Patch size P (default: model.patch)");

  std::string sweep_rs = "0.5,1,2,3,4";
  std::string sweep_modes = "A,B";
  auto* sweep = app.add_subcommand("sweep", "Train the baseline and every (mode, r) cell");
  add_common(sweep, sweep_o);
  sweep->add_option("--rs", sweep_rs, "Comma-separated sampling factors (empty: baseline only)");
  sweep->add_option("--modes", sweep_modes, "Comma-separated modes among A,B");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_o);
    if (*eval) return cmd_evaluate(eval_o, eval_ckpt, eval_seed);
    if (*flops) return cmd_flops(flops_o, flops_preset, flops_n, flops_per_mac);
    if (*attn) return cmd_attnmap(attn_o, attn_ckpt, attn_image, attn_index, attn_modes);
    if (*demo) return cmd_sample_demo(demo_o, demo_image_path, demo_index, demo_patch);
    if (*sweep) return cmd_sweep(sweep_o, sweep_rs, sweep_modes);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
