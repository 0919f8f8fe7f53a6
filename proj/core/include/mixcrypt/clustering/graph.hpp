// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mixcrypt/instahide/instahide.hpp"
#include "mixcrypt/parallel.hpp"

namespace mixcrypt::clustering {

/// Symmetric n x n similarity matrix with unit diagonal.
struct SimilarityGraph {
  std::size_t n = 0;
  std::vector<double> scores;

  double at(std::size_t i, std::size_t j) const { return scores[i * n + j]; }
};

/// Called once per unordered pair with i < j; must return a value in [0, 1].
using PairScorer = std::function<double(std::size_t i, std::size_t j)>;

SimilarityGraph build_similarity_graph(std::size_t n, const PairScorer& scorer,
                                       std::size_t threads = thread_budget());

/// 1 if the two encryptions share a target image, else 0.
PairScorer oracle_scorer(std::span<const instahide::Encryption> encryptions);

struct Cluster {
  std::vector<std::size_t> members;  // ascending
  std::size_t seed = 0;

  bool operator==(const Cluster&) const = default;
};

/// Greedy dense-subgraph extraction, repeated num_clusters times: the seed
/// is the unassigned node of largest weighted degree among unassigned
/// nodes; the unassigned node with the largest mean similarity to the
/// members joins while that mean is at least half the seed's row mean, up
/// to expected_size members. A seed always takes its best partner. Ties go
/// to the lowest id.
std::vector<Cluster> extract_cliques(const SimilarityGraph& graph, std::size_t num_clusters,
                                     std::size_t expected_size);

struct Assignment {
  std::size_t primary = 0;
  std::optional<std::size_t> secondary;
};

/// Each node goes to the two cliques with the highest mean similarity to
/// their members (the node itself excluded). Ties go to the lower index.
std::vector<Assignment> assign_encryptions(const SimilarityGraph& graph, std::span<const Cluster> cliques);

/// Encryptions grouped by primary assignment; one entry per clique.
std::vector<Cluster> primary_clusters(std::span<const Assignment> assignment, std::span<const Cluster> cliques);

/// One line per cluster, comma-separated member ids.
void write_clusters(std::ostream& out, std::span<const Cluster> clusters);
std::vector<Cluster> read_clusters(std::istream& in);

}  // namespace mixcrypt::clustering
