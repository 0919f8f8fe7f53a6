// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "mixcrypt/clustering/filter.hpp"
#include "mixcrypt/metrics/metrics.hpp"
#include "mixcrypt/restoration/fdn.hpp"

namespace mixcrypt::harness {

/// Flat "key = value" text with "[section]" headers. '#' starts a comment.
/// Keys are stored as "section.key".
using ConfigEntries = std::map<std::string, std::string>;

ConfigEntries parse_config(std::istream& in);
ConfigEntries load_config_file(const std::filesystem::path& path);

struct DataSettings {
  std::size_t image_size = 32;
  std::size_t public_pool = 64;
  std::size_t train_targets = 192;  // private images behind the training encryptions
  std::size_t targets = 16;         // N, private images under attack
  /// K; unset follows cluster_size (one augmented copy per cluster member), or 1
  /// for the shuffled pairing.
  std::optional<std::size_t> copies;
  std::size_t mix_count = 6;        // k
  double epsilon = 0.2;
  std::optional<std::size_t> cluster_size = 10;  // |M|; unset selects the N*K shuffled pairing
  std::size_t num_classes = 10;
  /// Blank partner, no public images, no sign flip, nonnegative privates.
  bool zero_noise = false;

  std::size_t resolved_copies() const { return copies.value_or(cluster_size.value_or(1)); }
};

struct PairNetSettings {
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::size_t pairs_per_epoch = 512;
  std::size_t batch_size = 16;
  std::size_t filters = 16;
  std::size_t blocks = 2;
  bool multi_resolution = true;
};

struct FdnSettings {
  restoration::FdnConfig model;
  restoration::FdnTrainConfig train{.epochs = 30};
};

enum class FilterMode { none, oracle, model };

FilterMode parse_filter_mode(std::string_view name);
const char* to_string(FilterMode mode);

struct AttackSettings {
  bool oracle_clusters = false;
  FilterMode filter = FilterMode::none;
  double filter_threshold = clustering::kDefaultFilterThreshold;
  /// Fall back to the oracle coefficient where label inference is ambiguous.
  bool oracle_lambda = true;
  bool run_avg = true;
  bool run_ca = true;
  bool run_ca_cn = true;
  std::size_t ca_iterations = 300;
  double ca_step = 1.0;
  /// Write PPM dumps of restored images next to the report.
  bool write_images = true;
};

struct PathSettings {
  std::filesystem::path data = "run/data";
  std::filesystem::path checkpoints = "run/checkpoints";
  std::filesystem::path output = "run/output";
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DataSettings data;
  PairNetSettings comparative;
  PairNetSettings filter;
  FdnSettings fdn;
  AttackSettings attack;
  PathSettings paths;
};

/// Applies entries over the defaults. Unknown keys and malformed values
/// raise ParameterError naming the key.
ExperimentConfig make_config(const ConfigEntries& entries);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Range checks across fields (k >= 2, |M| >= 2, zero_noise needs k = 2, ...).
void validate(const ExperimentConfig& cfg);

/// Canonical text form; make_config(parse_config(to_text(c))) reproduces c.
std::string to_text(const ExperimentConfig& cfg);

/// Points all three paths below `root`.
void set_root(ExperimentConfig& cfg, const std::filesystem::path& root);

}  // namespace mixcrypt::harness
