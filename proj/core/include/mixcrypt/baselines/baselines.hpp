// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mixcrypt/imaging/image.hpp"

namespace mixcrypt::baselines {

using imaging::Image;

/// min_A ||absB - C abs(A)||^2 subject to A in [-1, 1].
/// Row-major: absB is rows x dim, C is rows x cols, A is cols x dim.
struct CarliniProblem {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t dim = 0;
  std::vector<double> abs_b;
  std::vector<double> c;
};

struct CarliniConfig {
  std::size_t iterations = 300;
  double step_size = 1.0;
  std::size_t max_halvings = 40;
};

struct CarliniResult {
  std::vector<double> a;
  /// Objective before the first step and after every iteration.
  std::vector<double> objective_history;
  double objective = 0.0;
};

/// One sparse row of C: (column, coefficient) pairs.
using CoefficientRow = std::vector<std::pair<std::size_t, double>>;

/// Builds the problem from encryption images (abs is applied here) and one
/// coefficient row per encryption.
CarliniProblem make_carlini_problem(std::span<const Image> encryptions, std::span<const CoefficientRow> rows,
                                    std::size_t cols);

double carlini_objective(const CarliniProblem& problem, std::span<const double> a);

/// Projected subgradient descent from A = 0. The subgradient uses
/// sign(0) = +1 so that the zero start can move. A step that would raise
/// the objective is retried at half the step size. Accepted iterates are
/// folded to abs(A), so the returned entries lie in [0, 1].
CarliniResult carlini_attack(const CarliniProblem& problem, const CarliniConfig& cfg = {});

/// Row `col` of A as an image.
Image carlini_image(const CarliniResult& result, std::size_t col, std::size_t height, std::size_t width);

/// Mean of the re-weighted abs images, clamped to [0, 1].
Image averaging_attack(std::span<const Image> members, std::span<const double> lambdas);

}  // namespace mixcrypt::baselines
