// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/clustering/filter.hpp"

#include <algorithm>
#include <string>

#include "mixcrypt/errors.hpp"
#include "mixcrypt/imaging/augment.hpp"

namespace mixcrypt::clustering {

int filter_label(double epsilon_distance, double threshold) { return epsilon_distance < threshold ? 1 : -1; }

namespace {

struct TargetInfo {
  std::int64_t source = -1;
  imaging::AugmentParams params;
};

std::vector<TargetInfo> targets_of(std::span<const instahide::Encryption> encryptions) {
  std::vector<TargetInfo> out;
  for (const auto& e : encryptions) {
    if (!e.oracle) throw DataError("the epsilon filter oracle needs oracle blocks");
    out.push_back({e.oracle->target.source_id, e.oracle->target.params});
  }
  return out;
}

}  // namespace

NeighbourFn oracle_neighbours(std::span<const instahide::Encryption> encryptions, double threshold) {
  auto targets = targets_of(encryptions);
  const std::size_t w = encryptions.empty() ? 0 : encryptions[0].image.width;
  const std::size_t h = encryptions.empty() ? 0 : encryptions[0].image.height;
  return [targets = std::move(targets), threshold, w, h](std::size_t i, std::size_t j) {
    if (targets[i].source != targets[j].source) return false;
    return filter_label(imaging::epsilon_distance(targets[i].params, targets[j].params, w, h), threshold) == 1;
  };
}

NeighbourFn model_neighbours(const FilterModel& model, std::span<const ImageViews> views) {
  return [&model, views](std::size_t i, std::size_t j) { return model.neighbours(views[i], views[j]); };
}

std::vector<LabelledPair> filter_pairs(std::span<const instahide::Encryption> encryptions,
                                       std::span<const Cluster> clusters, double threshold) {
  auto targets = targets_of(encryptions);
  std::vector<LabelledPair> out;
  for (const auto& c : clusters) {
    for (std::size_t x = 0; x < c.members.size(); ++x) {
      for (std::size_t y = x + 1; y < c.members.size(); ++y) {
        const auto i = c.members[x], j = c.members[y];
        if (targets[i].source != targets[j].source) continue;
        const double d = imaging::epsilon_distance(targets[i].params, targets[j].params, encryptions[i].image.width,
                                                   encryptions[i].image.height);
        out.push_back({i, j, filter_label(d, threshold) == 1 ? 1.0 : 0.0});
      }
    }
  }
  return out;
}

PairTrainResult train_filter(FilterModel& model, std::span<const instahide::Encryption> encryptions,
                             std::span<const Cluster> clusters, const PairTrainConfig& cfg, Rng& rng,
                             const std::function<void(std::size_t, double, double)>& on_epoch) {
  std::vector<Cluster> train_clusters, held_clusters;
  for (std::size_t c = 0; c < clusters.size(); ++c) (c % 4 == 3 ? held_clusters : train_clusters).push_back(clusters[c]);
  auto train = filter_pairs(encryptions, train_clusters, model.threshold);
  auto held = filter_pairs(encryptions, held_clusters, model.threshold);
  std::vector<LabelledPair> pos, neg;
  for (const auto& p : train) (p.label > 0.5 ? pos : neg).push_back(p);
  if (pos.empty() || neg.empty()) {
    throw DataError("filter training labels are all " + std::string(pos.empty() ? "negative" : "positive") +
                    "; adjust t_eps or epsilon");
  }
  std::vector<ImageViews> views;
  views.reserve(encryptions.size());
  for (const auto& e : encryptions) views.push_back(image_views(imaging::abs_image(e.image)));
  // Balanced draws from the two label pools.
  auto sample = [&](Rng& r) {
    const auto& pool = uniform01(r) < 0.5 ? pos : neg;
    return pool[uniform_index(r, pool.size())];
  };
  return train_pairs(model.net, views, sample, held, cfg, rng, on_epoch);
}

FilterResult filter_cluster(const Cluster& cluster, const NeighbourFn& neighbours) {
  if (cluster.members.size() < 2) throw ParameterError("filtering needs a cluster of at least 2");
  const auto& m = cluster.members;
  std::vector<std::vector<std::size_t>> adj(m.size());
  for (std::size_t x = 0; x < m.size(); ++x)
    for (std::size_t y = x + 1; y < m.size(); ++y)
      if (neighbours(m[x], m[y])) {
        adj[x].push_back(m[y]);
        adj[y].push_back(m[x]);
      }
  std::size_t best = 0;
  for (std::size_t x = 1; x < m.size(); ++x)
    if (adj[x].size() > adj[best].size()) best = x;

  FilterResult out;
  if (adj[best].empty()) {
    const bool seed_inside = std::find(m.begin(), m.end(), cluster.seed) != m.end();
    out.cluster = {{seed_inside ? cluster.seed : m.front()}, seed_inside ? cluster.seed : m.front()};
    out.degenerate = true;
    return out;
  }
  out.cluster.seed = m[best];
  out.cluster.members = adj[best];
  out.cluster.members.push_back(m[best]);
  std::sort(out.cluster.members.begin(), out.cluster.members.end());
  return out;
}

}  // namespace mixcrypt::clustering
