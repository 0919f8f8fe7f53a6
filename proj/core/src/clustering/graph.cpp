// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/clustering/graph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::clustering {

SimilarityGraph build_similarity_graph(std::size_t n, const PairScorer& scorer, std::size_t threads) {
  SimilarityGraph g;
  g.n = n;
  g.scores.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) g.scores[i * n + i] = 1.0;
  // Row i scores the pairs (i, j > i); rows are independent.
  parallel_for(
      n,
      [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          const double s = scorer(i, j);
          if (!(s >= 0.0 && s <= 1.0)) throw DataError("pair score outside [0, 1]");
          g.scores[i * n + j] = s;
          g.scores[j * n + i] = s;
        }
      },
      threads);
  return g;
}

PairScorer oracle_scorer(std::span<const instahide::Encryption> encryptions) {
  std::vector<std::int64_t> target;
  for (const auto& e : encryptions) {
    if (!e.oracle) throw DataError("oracle scorer needs oracle blocks");
    target.push_back(e.oracle->target.source_id);
  }
  return [target = std::move(target)](std::size_t i, std::size_t j) { return target[i] == target[j] ? 1.0 : 0.0; };
}

std::vector<Cluster> extract_cliques(const SimilarityGraph& graph, std::size_t num_clusters,
                                     std::size_t expected_size) {
  if (num_clusters == 0) return {};
  if (2 * num_clusters > graph.n) {
    throw ParameterError(std::to_string(num_clusters) + " clusters of at least 2 do not fit " +
                         std::to_string(graph.n) + " nodes");
  }
  if (expected_size < 2) throw ParameterError("expected cluster size must be at least 2");
  const std::size_t n = graph.n;
  std::vector<bool> assigned(n, false);
  std::vector<Cluster> out;

  for (std::size_t c = 0; c < num_clusters; ++c) {
    std::size_t seed = n;
    double best_degree = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (assigned[i]) continue;
      double degree = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && !assigned[j]) degree += graph.at(i, j);
      if (degree > best_degree) {
        best_degree = degree;
        seed = i;
      }
    }
    std::size_t others = 0;
    for (std::size_t j = 0; j < n; ++j) others += (!assigned[j] && j != seed) ? 1 : 0;
    const double threshold = 0.5 * (others ? best_degree / static_cast<double>(others) : 0.0);

    std::vector<std::size_t> members{seed};
    std::vector<double> affinity(n, 0.0);  // summed similarity to the current members
    for (std::size_t j = 0; j < n; ++j) affinity[j] = graph.at(seed, j);
    std::vector<bool> taken = assigned;
    taken[seed] = true;
    while (members.size() < expected_size) {
      std::size_t best = n;
      double best_mean = -1.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (taken[j]) continue;
        const double mean = affinity[j] / static_cast<double>(members.size());
        if (mean > best_mean) {
          best_mean = mean;
          best = j;
        }
      }
      if (best == n) break;
      if (members.size() >= 2 && best_mean < threshold) break;
      members.push_back(best);
      taken[best] = true;
      for (std::size_t j = 0; j < n; ++j) affinity[j] += graph.at(best, j);
    }
    for (auto m : members) assigned[m] = true;
    std::sort(members.begin(), members.end());
    out.push_back({std::move(members), seed});
  }
  return out;
}

std::vector<Assignment> assign_encryptions(const SimilarityGraph& graph, std::span<const Cluster> cliques) {
  if (cliques.empty()) throw ParameterError("assignment needs at least one clique");
  std::vector<Assignment> out(graph.n);
  std::vector<double> score(cliques.size());
  for (std::size_t i = 0; i < graph.n; ++i) {
    for (std::size_t c = 0; c < cliques.size(); ++c) {
      double total = 0.0;
      std::size_t count = 0;
      for (auto m : cliques[c].members) {
        if (m == i) continue;
        total += graph.at(i, m);
        ++count;
      }
      score[c] = count ? total / static_cast<double>(count) : 0.0;
    }
    std::size_t first = 0;
    for (std::size_t c = 1; c < cliques.size(); ++c)
      if (score[c] > score[first]) first = c;
    out[i].primary = first;
    if (cliques.size() >= 2) {
      std::size_t second = first == 0 ? 1 : 0;
      for (std::size_t c = 0; c < cliques.size(); ++c)
        if (c != first && score[c] > score[second]) second = c;
      out[i].secondary = second;
    }
  }
  return out;
}

std::vector<Cluster> primary_clusters(std::span<const Assignment> assignment, std::span<const Cluster> cliques) {
  std::vector<Cluster> out(cliques.size());
  for (std::size_t c = 0; c < cliques.size(); ++c) out[c].seed = cliques[c].seed;
  for (std::size_t i = 0; i < assignment.size(); ++i) out.at(assignment[i].primary).members.push_back(i);
  return out;
}

void write_clusters(std::ostream& out, std::span<const Cluster> clusters) {
  for (const auto& c : clusters) {
    for (std::size_t i = 0; i < c.members.size(); ++i) out << (i ? "," : "") << c.members[i];
    out << '\n';
  }
}

std::vector<Cluster> read_clusters(std::istream& in) {
  std::vector<Cluster> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    Cluster c;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        c.members.push_back(static_cast<std::size_t>(v));
      } catch (const std::exception&) {
        throw FormatError("cluster file line " + std::to_string(line_no) + ": bad id '" + field + "'");
      }
    }
    std::sort(c.members.begin(), c.members.end());
    if (!c.members.empty()) c.seed = c.members.front();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace mixcrypt::clustering
