// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "mixcrypt/baselines/baselines.hpp"
#include "mixcrypt/clustering/comparative.hpp"
#include "mixcrypt/clustering/graph.hpp"
#include "mixcrypt/imaging/synthetic.hpp"
#include "mixcrypt/instahide/instahide.hpp"
#include "mixcrypt/metrics/metrics.hpp"
#include "mixcrypt/restoration/fdn.hpp"

namespace {

using namespace mixcrypt;
using imaging::Image;

struct Toy {
  std::vector<instahide::PrivateImage> privates;
  std::vector<instahide::Encryption> encryptions;
};

Toy toy_dataset(std::size_t targets, std::size_t m, std::size_t side, Rng& rng) {
  std::vector<instahide::PrivateImage> privates;
  for (std::size_t i = 0; i < targets; ++i) {
    privates.push_back({imaging::synthesize_image(side, side, imaging::SyntheticStyle::shapes, rng, i % 10), i % 10});
  }
  auto publics = imaging::synthesize_images(16, side, side, imaging::SyntheticStyle::shapes, rng);
  instahide::GenerationConfig cfg{.num_private = targets, .copies = 1, .mix_count = 6, .epsilon = 0.2,
                                  .cluster_size = m};
  auto ds = instahide::generate_dataset(privates, cfg, publics, rng);
  return {std::move(privates), std::move(ds.encryptions)};
}

void BM_GenerateDataset(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    Rng rng(1);
    benchmark::DoNotOptimize(toy_dataset(16, 10, side, rng));
  }
  state.SetItemsProcessed(state.iterations() * 160);
}
BENCHMARK(BM_GenerateDataset)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Mssim(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  auto a = imaging::synthesize_image(side, side, imaging::SyntheticStyle::shapes, rng);
  auto b = imaging::synthesize_image(side, side, imaging::SyntheticStyle::shapes, rng);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::mssim(a, b));
}
BENCHMARK(BM_Mssim)->Arg(16)->Arg(32)->Arg(64);

void BM_OracleClustering(benchmark::State& state) {
  Rng rng(3);
  auto ds = toy_dataset(16, 10, 16, rng);
  for (auto _ : state) {
    auto graph = clustering::build_similarity_graph(ds.encryptions.size(), clustering::oracle_scorer(ds.encryptions));
    auto cliques = clustering::extract_cliques(graph, 16, 10);
    benchmark::DoNotOptimize(clustering::assign_encryptions(graph, cliques));
  }
}
BENCHMARK(BM_OracleClustering)->Unit(benchmark::kMillisecond);

void BM_ComparativeScore(benchmark::State& state) {
  Rng rng(4);
  clustering::ComparativeNet net({}, rng);
  auto a = clustering::image_views(imaging::synthesize_image(32, 32, imaging::SyntheticStyle::shapes, rng));
  auto b = clustering::image_views(imaging::synthesize_image(32, 32, imaging::SyntheticStyle::shapes, rng));
  for (auto _ : state) {
    ad::NoGradGuard no_grad;
    benchmark::DoNotOptimize(net.symmetric_score(a, b));
  }
}
BENCHMARK(BM_ComparativeScore)->Unit(benchmark::kMicrosecond);

void BM_FdnRestore(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  auto ds = toy_dataset(2, m, 32, rng);
  std::vector<Image> members;
  std::vector<double> lambdas;
  for (const auto& e : ds.encryptions) {
    if (e.oracle->target.source_id != 0) continue;
    members.push_back(e.image);
    lambdas.push_back(e.oracle->lambdas[0]);
  }
  restoration::FdnModel model({}, rng);
  for (auto _ : state) {
    ad::NoGradGuard no_grad;
    benchmark::DoNotOptimize(model.restore(members, lambdas));
  }
}
BENCHMARK(BM_FdnRestore)->Arg(4)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_FdnTrainingStep(benchmark::State& state) {
  Rng rng(6);
  auto ds = toy_dataset(4, 10, 32, rng);
  restoration::FdnModel model({}, rng);
  std::vector<std::vector<std::size_t>> clusters(4);
  for (std::size_t i = 0; i < ds.encryptions.size(); ++i) {
    clusters[static_cast<std::size_t>(ds.encryptions[i].oracle->target.source_id)].push_back(i);
  }
  auto pairs = restoration::make_training_pairs(ds.encryptions, clusters, ds.privates);
  restoration::FdnTrainConfig cfg{.epochs = 1, .batch_size = 4};
  for (auto _ : state) {
    Rng train_rng(7);
    benchmark::DoNotOptimize(restoration::train_fdn(model, pairs, cfg, train_rng));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_FdnTrainingStep)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_CarliniAttack(benchmark::State& state) {
  Rng rng(8);
  auto ds = toy_dataset(4, 10, 16, rng);
  std::vector<Image> encs;
  std::vector<baselines::CoefficientRow> rows;
  for (const auto& e : ds.encryptions) {
    encs.push_back(e.image);
    rows.push_back({{static_cast<std::size_t>(e.oracle->target.source_id), e.oracle->lambdas[0]}});
  }
  auto problem = baselines::make_carlini_problem(encs, rows, 4);
  for (auto _ : state) benchmark::DoNotOptimize(baselines::carlini_attack(problem, {.iterations = 50}));
}
BENCHMARK(BM_CarliniAttack)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
