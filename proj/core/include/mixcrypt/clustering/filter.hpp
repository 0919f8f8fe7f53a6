// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mixcrypt/clustering/comparative.hpp"
#include "mixcrypt/clustering/graph.hpp"

namespace mixcrypt::clustering {

inline constexpr double kDefaultFilterThreshold = 0.2;

/// Pairwise classifier deciding whether two encryptions' targets are within
/// t_eps of each other. Uses the comparative architecture and pair features.
struct FilterModel {
  ComparativeNet net;
  double threshold = kDefaultFilterThreshold;  // t_eps

  /// Neighbours iff the symmetric score is at least 0.5.
  bool neighbours(const ImageViews& a, const ImageViews& b) const { return net.symmetric_score(a, b) >= 0.5; }
};

/// Neighbour predicate over encryption ids.
using NeighbourFn = std::function<bool(std::size_t, std::size_t)>;

/// 1 if the epsilon distance between the targets is below t_eps, else -1.
int filter_label(double epsilon_distance, double threshold);

/// Ground-truth predicate: targets of the same source whose augmentations
/// are within t_eps.
NeighbourFn oracle_neighbours(std::span<const instahide::Encryption> encryptions, double threshold);

NeighbourFn model_neighbours(const FilterModel& model, std::span<const ImageViews> views);

/// Within-cluster pairs labelled by the oracle epsilon distance of their
/// targets (1 below t_eps, 0 otherwise). Pairs whose targets differ are skipped.
std::vector<LabelledPair> filter_pairs(std::span<const instahide::Encryption> encryptions,
                                       std::span<const Cluster> clusters, double threshold);

/// Trains on within-cluster pairs; a quarter of the clusters is held out.
/// Throws DataError if all labels agree.
PairTrainResult train_filter(FilterModel& model, std::span<const instahide::Encryption> encryptions,
                             std::span<const Cluster> clusters, const PairTrainConfig& cfg, Rng& rng,
                             const std::function<void(std::size_t, double, double)>& on_epoch = {});

struct FilterResult {
  Cluster cluster;
  /// No member had a neighbour; the seed is returned alone.
  bool degenerate = false;
};

/// Keeps the member with the most neighbours (ties: lowest id) and those
/// neighbours.
FilterResult filter_cluster(const Cluster& cluster, const NeighbourFn& neighbours);

}  // namespace mixcrypt::clustering
