// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "mixcrypt/baselines/baselines.hpp"
#include "mixcrypt/errors.hpp"
#include "mixcrypt/imaging/synthetic.hpp"
#include "mixcrypt/instahide/instahide.hpp"
#include "mixcrypt/restoration/fdn.hpp"

using namespace mixcrypt;
using namespace mixcrypt::baselines;

namespace {

Image random_image(std::size_t h, std::size_t w, Rng& rng, double lo, double hi) {
  Image img(h, w);
  for (auto& v : img.pixels) v = uniform(rng, lo, hi);
  return img;
}

void expect_non_increasing(const std::vector<double>& history) {
  for (std::size_t i = 1; i < history.size(); ++i) EXPECT_LE(history[i], history[i - 1]) << "iteration " << i;
}

}  // namespace

TEST(Carlini, IdentityRecoversNonnegativeTruth) {
  Rng rng(1);
  std::vector<Image> truth{random_image(4, 4, rng, 0, 1), random_image(4, 4, rng, 0, 1), random_image(4, 4, rng, 0, 1)};
  std::vector<CoefficientRow> rows{{{0, 1.0}}, {{1, 1.0}}, {{2, 1.0}}};
  auto problem = make_carlini_problem(truth, rows, 3);
  auto result = carlini_attack(problem);
  EXPECT_LT(result.objective, 1e-8);
  expect_non_increasing(result.objective_history);
  for (std::size_t j = 0; j < 3; ++j) {
    auto img = carlini_image(result, j, 4, 4);
    for (std::size_t p = 0; p < img.size(); ++p) EXPECT_NEAR(img.pixels[p], truth[j].pixels[p], 1e-4);
  }
}

TEST(Carlini, ObjectiveMonotoneOnMixedProblem) {
  Rng rng(2);
  std::vector<Image> encs;
  std::vector<CoefficientRow> rows;
  for (std::size_t i = 0; i < 12; ++i) {
    encs.push_back(random_image(6, 6, rng, -1, 1));
    rows.push_back({{i % 4, uniform(rng, 0.1, 0.9)}, {(i + 1) % 4, uniform(rng, 0.1, 0.9)}});
  }
  auto problem = make_carlini_problem(encs, rows, 4);
  auto result = carlini_attack(problem, {.iterations = 200, .step_size = 4.0});
  expect_non_increasing(result.objective_history);
  EXPECT_LT(result.objective, result.objective_history.front());
  // Only abs(A) is identifiable; iterates keep the nonnegative representative.
  for (double v : result.a) {
    EXPECT_LE(v, 1.0);
    EXPECT_GE(v, 0.0);
  }
  EXPECT_DOUBLE_EQ(carlini_objective(problem, result.a), result.objective);
}

TEST(Carlini, AbsOfMixDiffersFromMixOfAbs) {
  // One pixel per image: targets -0.8 and 1 mixed with weights 0.5 and 0.3.
  const double mixed = std::fabs(0.5 * -0.8 + 0.3 * 1.0);
  EXPECT_NEAR(mixed, 0.1, 1e-15);
  EXPECT_NEAR(0.5 * 0.8 + 0.3 * 1.0, 0.7, 1e-15);
  // With the true A the model predicts 0.7 against an observed 0.1.
  std::vector<Image> encs{Image(1, 1, std::vector<double>{mixed, mixed, mixed})};
  std::vector<CoefficientRow> rows{{{0, 0.5}, {1, 0.3}}};
  auto problem = make_carlini_problem(encs, rows, 2);
  std::vector<double> truth{-0.8, -0.8, -0.8, 1.0, 1.0, 1.0};
  EXPECT_NEAR(carlini_objective(problem, truth), 3 * 0.6 * 0.6, 1e-12);
}

TEST(Carlini, RejectsBadShapes) {
  std::vector<Image> encs{Image(2, 2, 0.1)};
  std::vector<CoefficientRow> rows{{{3, 1.0}}};
  EXPECT_THROW(make_carlini_problem(encs, rows, 2), DimensionError);
  std::vector<CoefficientRow> negative{{{0, -1.0}}};
  EXPECT_THROW(make_carlini_problem(encs, negative, 2), ParameterError);
  std::vector<CoefficientRow> good{{{0, 1.0}}};
  auto problem = make_carlini_problem(encs, good, 1);
  EXPECT_THROW(carlini_objective(problem, std::vector<double>(5, 0.0)), DimensionError);
  EXPECT_THROW(carlini_attack(problem, {.step_size = 0.0}), ParameterError);
}

TEST(Averaging, SingleMemberIsItsReweightedAbs) {
  Rng rng(3);
  std::vector<Image> one{random_image(5, 5, rng, -0.5, 0.5)};
  std::vector<double> lambda{0.6};
  auto out = averaging_attack(one, lambda);
  for (std::size_t p = 0; p < out.size(); ++p) {
    EXPECT_NEAR(out.pixels[p], std::min(1.0, std::fabs(one[0].pixels[p]) / 0.6), 1e-15);
  }
}

TEST(Averaging, DuplicatesAndPermutationsDoNotChangeOutput) {
  Rng rng(4);
  std::vector<Image> members{random_image(5, 5, rng, -1, 1), random_image(5, 5, rng, -1, 1),
                             random_image(5, 5, rng, -1, 1)};
  std::vector<double> lambdas{0.5, 0.7, 0.9};
  auto base = averaging_attack(members, lambdas);
  std::vector<Image> doubled{members[0], members[1], members[2], members[0], members[1], members[2]};
  std::vector<double> doubled_l{0.5, 0.7, 0.9, 0.5, 0.7, 0.9};
  auto dup = averaging_attack(doubled, doubled_l);
  for (std::size_t p = 0; p < base.size(); ++p) EXPECT_NEAR(dup.pixels[p], base.pixels[p], 1e-15);
  std::vector<Image> perm{members[2], members[0], members[1]};
  std::vector<double> perm_l{0.9, 0.5, 0.7};
  EXPECT_EQ(averaging_attack(perm, perm_l), base);
  EXPECT_THROW(averaging_attack({}, {}), DataError);
}

TEST(Averaging, ZeroNoiseSetRecoversTargetAbs) {
  Rng rng(5);
  std::vector<instahide::PrivateImage> privates;
  for (std::size_t i = 0; i < 3; ++i) {
    privates.push_back({imaging::to_nonnegative(imaging::synthesize_image(8, 8, imaging::SyntheticStyle::shapes, rng)), i});
  }
  instahide::GenerationConfig cfg{.num_private = 3, .copies = 1, .mix_count = 2, .epsilon = 0.0, .cluster_size = 8,
                                  .blank_partner = true, .sign_flip = false};
  auto ds = instahide::generate_dataset(privates, cfg, {}, rng);
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<Image> members;
    std::vector<double> lambdas;
    for (const auto& e : ds.encryptions) {
      if (e.oracle->target.source_id != static_cast<std::int64_t>(t)) continue;
      members.push_back(e.image);
      lambdas.push_back(e.oracle->lambdas[0]);
    }
    auto out = averaging_attack(members, lambdas);
    for (std::size_t p = 0; p < out.size(); ++p) EXPECT_NEAR(out.pixels[p], privates[t].image.pixels[p], 1e-12);
  }
}
