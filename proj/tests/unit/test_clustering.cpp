// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <set>
#include <sstream>

#include "gradcheck.hpp"
#include "mixcrypt/clustering/comparative.hpp"
#include "mixcrypt/clustering/filter.hpp"
#include "mixcrypt/clustering/graph.hpp"
#include "mixcrypt/errors.hpp"
#include "mixcrypt/imaging/synthetic.hpp"

using namespace mixcrypt;
using namespace mixcrypt::clustering;
using instahide::Encryption;

namespace {

instahide::GeneratedDataset experiment(std::size_t n, std::size_t m, double eps, Rng& rng, std::size_t side = 16) {
  std::vector<instahide::PrivateImage> privates;
  for (std::size_t i = 0; i < n; ++i) {
    privates.push_back({imaging::synthesize_image(side, side, imaging::SyntheticStyle::shapes, rng, i % 10), i % 10});
  }
  auto publics = imaging::synthesize_images(6, side, side, imaging::SyntheticStyle::shapes, rng);
  instahide::GenerationConfig cfg{.num_private = n, .copies = m, .mix_count = 4, .epsilon = eps, .cluster_size = m};
  return instahide::generate_dataset(privates, cfg, publics, rng);
}

std::set<std::vector<std::size_t>> truth_partition(const std::vector<Encryption>& encs) {
  std::map<std::int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < encs.size(); ++i) groups[encs[i].oracle->target.source_id].push_back(i);
  std::set<std::vector<std::size_t>> out;
  for (auto& [k, v] : groups) out.insert(v);
  return out;
}

SimilarityGraph uniform_graph(std::size_t n, double s) {
  return build_similarity_graph(n, [s](std::size_t, std::size_t) { return s; }, 1);
}

}  // namespace

TEST(PairFeatures, IdenticalInputsDuplicateHalves) {
  Rng rng(1);
  auto img = imaging::synthesize_image(32, 32, imaging::SyntheticStyle::shapes, rng);
  auto f = pair_features(img, img);
  ASSERT_EQ(f.hi.shape(), (ad::Shape{6, 16, 16}));
  ASSERT_EQ(f.lo.shape(), (ad::Shape{6, 16, 16}));
  for (std::size_t i = 0; i < 3 * 256; ++i) {
    EXPECT_EQ(f.hi[i], f.hi[i + 3 * 256]);
    EXPECT_EQ(f.lo[i], f.lo[i + 3 * 256]);
  }
}

TEST(PairFeatures, ConstantImagesGiveConstantPlanes) {
  auto f = pair_features(imaging::Image(32, 32, 0.25), imaging::Image(32, 32, -0.5));
  for (std::size_t i = 0; i < 6 * 256; ++i) {
    EXPECT_EQ(f.hi[i], i < 768 ? 0.25 : -0.5);
    EXPECT_EQ(f.lo[i], i < 768 ? 0.25 : -0.5);
  }
}

TEST(PairFeatures, SwappingSwapsChannels) {
  Rng rng(2);
  auto a = imaging::synthesize_image(32, 32, imaging::SyntheticStyle::shapes, rng);
  auto b = imaging::synthesize_image(32, 32, imaging::SyntheticStyle::shapes, rng);
  auto ab = pair_features(a, b), ba = pair_features(b, a);
  for (std::size_t i = 0; i < 768; ++i) {
    EXPECT_EQ(ab.hi[i], ba.hi[i + 768]);
    EXPECT_EQ(ab.lo[i + 768], ba.lo[i]);
  }
  EXPECT_THROW(pair_features(a, imaging::Image(32, 30)), DimensionError);
}

TEST(ComparativeNet, ScoresInUnitIntervalAndSymmetricMean) {
  Rng rng(3);
  ComparativeNet net({}, rng);
  auto a = image_views(imaging::synthesize_image(32, 32, imaging::SyntheticStyle::shapes, rng));
  auto b = image_views(imaging::synthesize_image(32, 32, imaging::SyntheticStyle::shapes, rng));
  const double s = net.score(a, b);
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
  EXPECT_EQ(net.symmetric_score(a, b), net.symmetric_score(b, a));
}

TEST(ComparativeNet, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (bool multi : {true, false}) {
    ComparativeNet net({.filters = 4, .blocks = 1, .multi_resolution = multi}, rng);
    auto a = image_views(imaging::synthesize_image(16, 16, imaging::SyntheticStyle::shapes, rng));
    auto b = image_views(imaging::synthesize_image(16, 16, imaging::SyntheticStyle::shapes, rng));
    auto params = ad::parameter_list(net.parameters());
    auto res = mixcrypt::testing::gradcheck([&] { return ad::bce_with_logits(net.logit(a, b), 1.0); }, params);
    EXPECT_LT(res.worst_relative_error, 1e-3) << "multi_resolution=" << multi;
  }
}

TEST(ComparativeNet, UntrainedIsNearChance) {
  Rng rng(5);
  auto ds = experiment(8, 6, 0.2, rng, 32);
  ComparativeNet net({}, rng);
  std::vector<ImageViews> views;
  for (const auto& e : ds.encryptions) views.push_back(image_views(imaging::abs_image(e.image)));
  std::vector<LabelledPair> pairs;
  for (std::size_t i = 0; i < ds.encryptions.size(); ++i)
    for (std::size_t j = i + 1; j < ds.encryptions.size(); ++j) {
      const bool same = ds.encryptions[i].oracle->target.source_id == ds.encryptions[j].oracle->target.source_id;
      if (same || (i + j) % 7 == 0) pairs.push_back({i, j, same ? 1.0 : 0.0});
    }
  const double acc = pair_accuracy(net, views, pairs);
  EXPECT_GT(acc, 0.2);
  EXPECT_LT(acc, 0.8);
}

TEST(ComparativeNet, LearnsBrightnessMatch) {
  Rng rng(12);
  std::vector<ImageViews> views;
  std::vector<int> bright;
  for (std::size_t i = 0; i < 24; ++i) {
    Image img(16, 16);
    bright.push_back(static_cast<int>(i % 2));
    for (auto& v : img.pixels) v = (bright.back() ? 0.6 : -0.6) + uniform(rng, -0.2, 0.2);
    views.push_back(image_views(img));
  }
  auto label = [&](std::size_t a, std::size_t b) { return bright[a] == bright[b] ? 1.0 : 0.0; };
  std::vector<LabelledPair> heldout;
  for (std::size_t a = 16; a < 24; ++a)
    for (std::size_t b = 16; b < 24; ++b)
      if (a != b) heldout.push_back({a, b, label(a, b)});
  ComparativeNet net({.filters = 4, .blocks = 1}, rng);
  auto sample = [&](Rng& r) {
    const std::size_t a = uniform_index(r, 16), b = uniform_index(r, 16);
    return LabelledPair{a, b, label(a, b)};
  };
  auto result = train_pairs(net, views, sample, heldout,
                            {.epochs = 15, .pairs_per_epoch = 128, .batch_size = 8, .learning_rate = 1e-2}, rng);
  EXPECT_LT(result.train_loss.back(), result.train_loss.front());
  EXPECT_GT(result.heldout_accuracy, 0.9);
}

TEST(ComparativeNet, TrainingNeedsPositivePairs) {
  Rng rng(6);
  auto ds = experiment(3, 2, 0.0, rng, 16);
  ComparativeNet net({.filters = 4, .blocks = 1}, rng);
  EXPECT_THROW(train_comparative(net, ds.encryptions, {.epochs = 1}, rng), DataError);
}

TEST(SimilarityGraph, OracleBlocksAndPairCount) {
  Rng rng(7);
  auto ds = experiment(3, 4, 0.1, rng);
  auto g = build_similarity_graph(ds.encryptions.size(), oracle_scorer(ds.encryptions), 2);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j) {
      EXPECT_EQ(g.at(i, j), g.at(j, i));
      EXPECT_EQ(g.at(i, j), i / 4 == j / 4 ? 1.0 : 0.0);
    }
  std::atomic<int> calls{0};
  build_similarity_graph(3, [&](std::size_t, std::size_t) { return ++calls, 0.5; }, 1);
  EXPECT_EQ(calls.load(), 3);
}

TEST(Cliques, OracleGraphRecoversPartition) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 7), m = 2 + uniform_index(rng, 7);
    auto ds = experiment(n, m, 0.2, rng, 8);
    auto g = build_similarity_graph(ds.encryptions.size(), oracle_scorer(ds.encryptions), 1);
    auto cliques = extract_cliques(g, n, m);
    std::set<std::vector<std::size_t>> got;
    for (const auto& c : cliques) got.insert(c.members);
    EXPECT_EQ(got, truth_partition(ds.encryptions));
    auto assignment = assign_encryptions(g, cliques);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      const auto& members = cliques[assignment[i].primary].members;
      EXPECT_TRUE(std::find(members.begin(), members.end(), i) != members.end());
    }
  }
}

TEST(Cliques, EqualScoresTakeLowestIds) {
  auto cliques = extract_cliques(uniform_graph(6, 0.3), 1, 3);
  ASSERT_EQ(cliques.size(), 1u);
  EXPECT_EQ(cliques[0].seed, 0u);
  EXPECT_EQ(cliques[0].members, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Cliques, EdgeCases) {
  EXPECT_TRUE(extract_cliques(uniform_graph(4, 0.5), 0, 3).empty());
  EXPECT_THROW(extract_cliques(uniform_graph(3, 0.5), 2, 2), ParameterError);
}

TEST(Assignment, TiesAndSingleClique) {
  // Node 4 is equally similar to both cliques.
  auto g = build_similarity_graph(5, [](std::size_t i, std::size_t j) {
    if (j == 4) return 0.5;
    return (i < 2) == (j < 2) ? 1.0 : 0.0;
  }, 1);
  std::vector<Cluster> cliques{{{0, 1}, 0}, {{2, 3}, 2}};
  auto a = assign_encryptions(g, cliques);
  EXPECT_EQ(a[4].primary, 0u);
  EXPECT_EQ(a[4].secondary, 1u);
  EXPECT_EQ(a[0].primary, 0u);
  EXPECT_EQ(a[3].primary, 1u);

  std::vector<Cluster> one{{{0, 1}, 0}};
  for (const auto& x : assign_encryptions(g, one)) EXPECT_FALSE(x.secondary);
}

TEST(ClusterDump, RoundTrip) {
  std::vector<Cluster> clusters{{{0, 3, 7}, 0}, {{1, 2}, 1}};
  std::stringstream buf;
  write_clusters(buf, clusters);
  EXPECT_EQ(buf.str(), "0,3,7\n1,2\n");
  EXPECT_EQ(read_clusters(buf), clusters);
  std::stringstream bad("1,x\n");
  EXPECT_THROW(read_clusters(bad), FormatError);
}

TEST(Filter, LabelThreshold) {
  EXPECT_EQ(filter_label(0.0, 0.2), 1);
  EXPECT_EQ(filter_label(0.5, 0.2), -1);
  EXPECT_EQ(kDefaultFilterThreshold, 0.2);
}

TEST(Filter, AllNeighboursKeepsCluster) {
  Cluster c{{1, 4, 6}, 1};
  auto out = filter_cluster(c, [](std::size_t, std::size_t) { return true; });
  EXPECT_EQ(out.cluster.members, c.members);
  EXPECT_FALSE(out.degenerate);
}

TEST(Filter, SingletonsReturnSeedWithFlag) {
  Cluster c{{1, 4, 6}, 4};
  auto out = filter_cluster(c, [](std::size_t, std::size_t) { return false; });
  EXPECT_EQ(out.cluster.members, (std::vector<std::size_t>{4}));
  EXPECT_TRUE(out.degenerate);
}

TEST(Filter, OracleRetainedPairsWithinTwiceThreshold) {
  Rng rng(9);
  auto ds = experiment(6, 12, 0.5, rng);
  auto neighbours = oracle_neighbours(ds.encryptions, 0.2);
  for (std::size_t t = 0; t < 6; ++t) {
    Cluster c;
    for (std::size_t l = 0; l < 12; ++l) c.members.push_back(t * 12 + l);
    c.seed = c.members[0];
    auto result = filter_cluster(c, neighbours).cluster;
    const auto& kept = result.members;
    for (auto i : kept)
      for (auto j : kept) {
        const auto& a = ds.encryptions[i].oracle->target.params;
        const auto& b = ds.encryptions[j].oracle->target.params;
        EXPECT_LT(imaging::epsilon_distance(a, b, 16, 16), 0.4);
      }
    // The kept set is exactly the centre plus its ground-truth neighbours.
    for (auto i : c.members) {
      const bool in_kept = std::find(kept.begin(), kept.end(), i) != kept.end();
      EXPECT_EQ(in_kept, i == result.seed || neighbours(result.seed, i));
    }
  }
}

TEST(Filter, TrainingPairsFollowOracleDistances) {
  Rng rng(10);
  auto ds = experiment(4, 6, 0.4, rng);
  std::vector<Cluster> clusters;
  for (std::size_t t = 0; t < 4; ++t) {
    Cluster c;
    for (std::size_t l = 0; l < 6; ++l) c.members.push_back(t * 6 + l);
    clusters.push_back(c);
  }
  auto pairs = filter_pairs(ds.encryptions, clusters, 0.2);
  EXPECT_EQ(pairs.size(), 4u * 15u);
  auto oracle = oracle_neighbours(ds.encryptions, 0.2);
  for (const auto& p : pairs) EXPECT_EQ(p.label > 0.5, oracle(p.a, p.b));
}
