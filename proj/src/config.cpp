// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "randvit/error.hpp"

namespace randvit {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorKind::BadConfig, "key '" + key + "': expected " + want + ", got '" + value + "'");
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[400];
  const double a = std::abs(v);
  const bool plain = a == 0.0 || (a >= 1e-6 && a < 1e15);
  const auto [p, ec] = plain ? std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed)
                             : std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ec == std::errc() ? p : buf);
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::string& source) {
  KeyValueConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::BadConfig, where + ": unterminated section");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::BadConfig, where + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::BadConfig, where + ": empty key");
    if (!section.empty()) key = section + "." + key;
    cfg.entries_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::BadConfig, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

RunConfig RunConfig::from(const KeyValueConfig& kv) {
  RunConfig rc;
  if (auto preset = kv.get("model.preset")) {
    rc.model_preset = *preset;
    rc.model = VitConfig::preset(*preset);
  }

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto u64 = [](std::uint64_t& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_int<std::uint64_t>(k, v); };
  };
  auto i32 = [](int& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_int<int>(k, v); };
  };
  auto sz = [](std::size_t& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_int<std::size_t>(k, v); };
  };
  auto real = [](double& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_real(k, v); };
  };
  auto str = [](std::string& dst) -> Setter {
    return [&dst](const std::string&, const std::string& v) { dst = v; };
  };

  const std::map<std::string, Setter> setters = {
      {"model.preset", [](const std::string&, const std::string&) {}},
      {"run.mode", [&rc](const std::string&, const std::string& v) { rc.model.mode = parse_mode(v); }},
      {"run.r", real(rc.model.r)},
      {"run.seed", u64(rc.train.seed)},
      {"run.eval_seed", u64(rc.train.eval_seed)},
      {"run.eval_draws", i32(rc.train.eval_draws)},
      {"run.out", str(rc.out_dir)},
      {"run.rollout_reduce",
       [&rc](const std::string&, const std::string& v) { rc.rollout = parse_rollout_reduce(v); }},
      {"data.source",
       [&rc](const std::string& k, const std::string& v) {
         if (v == "synth") rc.data.source = DataSource::Synth;
         else if (v == "corpus") rc.data.source = DataSource::Corpus;
         else bad_value(k, v, "'synth' or 'corpus'");
       }},
      {"data.train_path", str(rc.data.train_path)},
      {"data.val_path", str(rc.data.val_path)},
      {"data.n_train", sz(rc.data.n_train)},
      {"data.n_val", sz(rc.data.n_val)},
      {"data.seed", u64(rc.data.seed)},
      {"data.noise_sigma", real(rc.data.noise_sigma)},
      {"data.resize_height", i32(rc.data.resize_height)},
      {"data.resize_width", i32(rc.data.resize_width)},
      {"model.channels", i32(rc.model.channels)},
      {"model.image_height", i32(rc.model.image_height)},
      {"model.image_width", i32(rc.model.image_width)},
      {"model.n_classes", i32(rc.model.n_classes)},
      {"model.patch", i32(rc.model.patch)},
      {"model.dim", i32(rc.model.dim)},
      {"model.depth", i32(rc.model.depth)},
      {"model.heads", i32(rc.model.heads)},
      {"model.mlp_ratio", i32(rc.model.mlp_ratio)},
      {"model.pos_temperature", real(rc.model.pos_temperature)},
      {"train.epochs", i32(rc.train.epochs)},
      {"train.batch_size", i32(rc.train.batch_size)},
      {"train.lr", real(rc.train.lr)},
      {"train.weight_decay", real(rc.train.weight_decay)},
      {"train.beta1", real(rc.train.beta1)},
      {"train.beta2", real(rc.train.beta2)},
      {"train.adam_eps", real(rc.train.adam_eps)},
      {"train.warmup_fraction", real(rc.train.warmup_fraction)},
      {"train.mixup_alpha", real(rc.train.mixup_alpha)},
      {"train.decay",
       [&rc](const std::string&, const std::string& v) { rc.train.decay = parse_weight_decay_mode(v); }},
  };

  for (const auto& [key, value] : kv.entries()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorKind::BadConfig, "unknown key '" + key + "'");
    try {
      it->second(key, value);
    } catch (const Error& e) {
      if (std::string(e.what()).find(key) != std::string::npos) throw;
      throw Error(ErrorKind::BadConfig, "key '" + key + "': " + e.what());
    }
  }
  for (const char* k : {"model.channels", "model.image_height", "model.image_width",
                        "model.n_classes"}) {
    if (kv.contains(k)) rc.explicit_shape_keys.insert(k);
  }
  return rc;
}

KeyValueConfig RunConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("model.preset", model_preset);
  kv.set("run.mode", to_string(model.mode));
  kv.set("run.r", format_double(model.r));
  kv.set("run.seed", std::to_string(train.seed));
  kv.set("run.eval_seed", std::to_string(train.eval_seed));
  kv.set("run.eval_draws", std::to_string(train.eval_draws));
  kv.set("run.out", out_dir);
  kv.set("run.rollout_reduce", to_string(rollout));
  kv.set("data.source", data.source == DataSource::Synth ? "synth" : "corpus");
  if (!data.train_path.empty()) kv.set("data.train_path", data.train_path);
  if (!data.val_path.empty()) kv.set("data.val_path", data.val_path);
  kv.set("data.n_train", std::to_string(data.n_train));
  kv.set("data.n_val", std::to_string(data.n_val));
  kv.set("data.seed", std::to_string(data.seed));
  kv.set("data.noise_sigma", format_double(data.noise_sigma));
  kv.set("data.resize_height", std::to_string(data.resize_height));
  kv.set("data.resize_width", std::to_string(data.resize_width));
  kv.set("model.channels", std::to_string(model.channels));
  kv.set("model.image_height", std::to_string(model.image_height));
  kv.set("model.image_width", std::to_string(model.image_width));
  kv.set("model.n_classes", std::to_string(model.n_classes));
  kv.set("model.patch", std::to_string(model.patch));
  kv.set("model.dim", std::to_string(model.dim));
  kv.set("model.depth", std::to_string(model.depth));
  kv.set("model.heads", std::to_string(model.heads));
  kv.set("model.mlp_ratio", std::to_string(model.mlp_ratio));
  kv.set("model.pos_temperature", format_double(model.pos_temperature));
  kv.set("train.epochs", std::to_string(train.epochs));
  kv.set("train.batch_size", std::to_string(train.batch_size));
  kv.set("train.lr", format_double(train.lr));
  kv.set("train.weight_decay", format_double(train.weight_decay));
  kv.set("train.beta1", format_double(train.beta1));
  kv.set("train.beta2", format_double(train.beta2));
  kv.set("train.adam_eps", format_double(train.adam_eps));
  kv.set("train.warmup_fraction", format_double(train.warmup_fraction));
  kv.set("train.mixup_alpha", format_double(train.mixup_alpha));
  kv.set("train.decay", to_string(train.decay));
  return kv;
}

namespace {

void apply_resize(Dataset& ds, int h, int w) {
  if (h <= 0 && w <= 0) return;
  for (auto& img : ds.images) {
    img = resize_bilinear(img, h > 0 ? h : img.height(), w > 0 ? w : img.width());
  }
}

}  // namespace

std::pair<Dataset, Dataset> load_datasets(RunConfig& cfg) {
  Dataset train;
  Dataset val;
  if (cfg.data.source == DataSource::Synth) {
    GlyphGeometry geom;
    geom.noise_sigma = cfg.data.noise_sigma;
    train = synth_glyphs(cfg.data.n_train, cfg.data.seed, geom);
    val = synth_glyphs(cfg.data.n_val, cfg.data.seed + 1, geom);
  } else {
    if (cfg.data.train_path.empty()) {
      throw Error(ErrorKind::BadConfig, "key 'data.train_path' is required for data.source = corpus");
    }
    if (cfg.data.val_path.empty()) {
      throw Error(ErrorKind::BadConfig, "key 'data.val_path' is required for data.source = corpus");
    }
    train = load_binary_corpus(cfg.data.train_path, Split::Train);
    val = load_binary_corpus(cfg.data.val_path, Split::Val);
  }
  train.split = Split::Train;
  val.split = Split::Val;
  apply_resize(train, cfg.data.resize_height, cfg.data.resize_width);
  apply_resize(val, cfg.data.resize_height, cfg.data.resize_width);
  if (train.empty()) throw Error(ErrorKind::EmptySplit, "training split is empty");
  if (val.empty()) throw Error(ErrorKind::EmptySplit, "validation split is empty");

  const ImageTensor& first = train.images.front();
  const std::pair<const char*, int> derived[] = {
      {"model.channels", first.channels()},
      {"model.image_height", first.height()},
      {"model.image_width", first.width()},
      {"model.n_classes", std::max(train.n_classes, val.n_classes)},
  };
  int* fields[] = {&cfg.model.channels, &cfg.model.image_height, &cfg.model.image_width,
                   &cfg.model.n_classes};
  for (std::size_t i = 0; i < std::size(derived); ++i) {
    if (cfg.explicit_shape_keys.count(derived[i].first) && *fields[i] != derived[i].second) {
      throw Error(ErrorKind::BadConfig, "key '" + std::string(derived[i].first) + "' = " +
                                            std::to_string(*fields[i]) + " but the data has " +
                                            std::to_string(derived[i].second));
    }
    *fields[i] = derived[i].second;
  }
  for (const auto& img : val.images) {
    if (img.channels() != first.channels() || img.height() != first.height() ||
        img.width() != first.width()) {
      throw Error(ErrorKind::SchemaMismatch, "validation images differ in shape from training images");
    }
  }
  return {std::move(train), std::move(val)};
}

}  // namespace randvit
