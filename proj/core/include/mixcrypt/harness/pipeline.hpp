// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixcrypt/clustering/graph.hpp"
#include "mixcrypt/errors.hpp"
#include "mixcrypt/harness/config.hpp"
#include "mixcrypt/harness/report.hpp"
#include "mixcrypt/instahide/instahide.hpp"

// Batch stages. Every stage reads its inputs from and writes its outputs to
// the directories in ExperimentConfig::paths, so stages can run as separate
// processes. Randomness comes from stage_rng(seed, <stage tag>).
namespace mixcrypt::harness {

/// A stage input is absent; the message names the stage that produces it.
class MissingArtifactError : public DataError {
 public:
  MissingArtifactError(const std::filesystem::path& path, std::string_view stage);
};

using Log = std::function<void(const std::string&)>;

// Artifact locations.
std::filesystem::path train_data_path(const ExperimentConfig& cfg);
std::filesystem::path test_data_path(const ExperimentConfig& cfg);
std::filesystem::path train_privates_path(const ExperimentConfig& cfg);
std::filesystem::path test_privates_path(const ExperimentConfig& cfg);
std::filesystem::path comparative_checkpoint_path(const ExperimentConfig& cfg);
std::filesystem::path filter_checkpoint_path(const ExperimentConfig& cfg);
std::filesystem::path fdn_checkpoint_path(const ExperimentConfig& cfg);
std::filesystem::path clusters_path(const ExperimentConfig& cfg);
std::filesystem::path assignments_path(const ExperimentConfig& cfg);
std::filesystem::path filtered_clusters_path(const ExperimentConfig& cfg);
std::filesystem::path restored_path(const ExperimentConfig& cfg);
std::filesystem::path restored_index_path(const ExperimentConfig& cfg);
std::filesystem::path report_path(const ExperimentConfig& cfg);

struct Corpus {
  std::vector<imaging::Image> publics;
  std::vector<instahide::PrivateImage> train;
  std::vector<instahide::PrivateImage> test;
};

/// Synthetic images. Public, training and attacked images come from three
/// separate streams, so resizing one set leaves the others unchanged.
Corpus make_corpus(const ExperimentConfig& cfg);

instahide::GenerationConfig generation_config(const DataSettings& data, std::size_t num_private);

struct GenDataSummary {
  std::size_t train_encryptions = 0;
  std::size_t test_encryptions = 0;
  /// FNV-1a of the serialized attacked dataset, 16 hex digits.
  std::string digest;
};

/// gen-data: training and attacked encryptions (with oracle blocks) and the
/// private images behind them.
GenDataSummary gen_data(const ExperimentConfig& cfg, const Log& log = {});

/// FNV-1a over the serialized records, as 16 hex digits.
std::string dataset_digest(const std::vector<instahide::Encryption>& records);

/// train-comparative: pair scorer trained on the training encryptions.
clustering::PairTrainResult train_comparative_stage(const ExperimentConfig& cfg, const Log& log = {});

/// train-filter: t_eps neighbour classifier trained on the training clusters.
clustering::PairTrainResult train_filter_stage(const ExperimentConfig& cfg, const Log& log = {});

/// train-fdn: FDN trained on the training clusters. Returns per-epoch loss.
restoration::FdnTrainResult train_fdn_stage(const ExperimentConfig& cfg, const Log& log = {});

/// Per-encryption cluster indices; -1 when there is no secondary cluster.
struct ClusterAssignment {
  std::int64_t primary = -1;
  std::int64_t secondary = -1;
};

struct Clustering {
  std::vector<clustering::Cluster> clusters;
  std::vector<ClusterAssignment> assignments;
};

/// cluster: groups the attacked encryptions. With `oracle` the ground-truth
/// 0/1 scorer replaces the comparative net.
Clustering cluster_stage(const ExperimentConfig& cfg, bool oracle, const Log& log = {});

/// filter: applies the configured filter mode to the saved clusters.
std::vector<clustering::Cluster> filter_stage(const ExperimentConfig& cfg, const Log& log = {});

struct StageSelection {
  bool fdn = true;
  bool baselines = true;
};

/// attack: clustering, filtering, restoration and evaluation. Writes the
/// clusters, restored images and report.
AttackReport attack_stage(const ExperimentConfig& cfg, const StageSelection& select = {}, const Log& log = {});

/// eval: recomputes the report from the saved restored images.
AttackReport eval_stage(const ExperimentConfig& cfg, const Log& log = {});

struct SweepCell {
  std::size_t m = 0;
  double epsilon = 0.0;
  std::size_t k = 0;
  std::filesystem::path root;
  std::map<std::string, double> means;
};

struct SweepSpec {
  std::vector<std::size_t> ms;
  std::vector<double> epsilons;
  std::vector<std::size_t> ks;
};

/// One gen-data / train / attack run per (|M|, eps, k) cell below
/// output/sweep. Cells run in parallel up to thread_budget(). Writes
/// output/sweep.csv.
std::vector<SweepCell> sweep_stage(const ExperimentConfig& cfg, const SweepSpec& spec, const Log& log = {});

inline constexpr const char* kSweepHeader = "m,epsilon,k,method,mean_ssim";

}  // namespace mixcrypt::harness
