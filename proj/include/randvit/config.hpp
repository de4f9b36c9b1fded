// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration as flat key/value text:
//
//   # comment
//   run.mode = A
//   [train]
//   epochs = 30        # same as train.epochs = 30
//
// Keys are dotted; a [section] line prefixes the keys that follow it.
// Unknown keys and malformed values are rejected with the key in the message.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "randvit/analysis.hpp"
#include "randvit/data.hpp"
#include "randvit/model.hpp"
#include "randvit/train.hpp"

namespace randvit {

class KeyValueConfig {
 public:
  /// Throws BadConfig with the line number on syntax errors.
  static KeyValueConfig parse(std::string_view text, const std::string& source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  std::optional<std::string> get(const std::string& key) const;
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Sorted "key = value" lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> entries_;
};

enum class DataSource { Synth, Corpus };

struct DataConfig {
  DataSource source = DataSource::Synth;
  std::string train_path;
  std::string val_path;
  std::size_t n_train = 2000;
  std::size_t n_val = 500;
  std::uint64_t seed = 7;
  double noise_sigma = 0.1;
  int resize_height = 0;  // 0 keeps the stored size
  int resize_width = 0;
};

struct RunConfig {
  std::string model_preset = "desk";
  VitConfig model = VitConfig::desk();
  TrainConfig train;
  DataConfig data;
  std::string out_dir = "out";
  RolloutReduce rollout = RolloutReduce::ColMean;
  /// Data-derived model keys given explicitly; load_datasets checks them.
  std::set<std::string> explicit_shape_keys;

  /// Applies preset first, then every other key. Throws BadConfig.
  static RunConfig from(const KeyValueConfig& kv);
  /// Every resolved field, so that from(to_kv()) reproduces this config.
  KeyValueConfig to_kv() const;
};

/// Shortest round-trip text for a double.
std::string format_double(double v);

/// Loads train/val splits and fills the data-derived model fields (channels,
/// image size, class count). Throws BadConfig when explicit values disagree.
std::pair<Dataset, Dataset> load_datasets(RunConfig& cfg);

}  // namespace randvit
