// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mixcrypt/errors.hpp"
#include "mixcrypt/restoration/fdn.hpp"

namespace mixcrypt::baselines {

namespace {

void check(const CarliniProblem& p) {
  if (p.rows == 0 || p.cols == 0 || p.dim == 0) throw DimensionError("empty Carlini problem");
  if (p.abs_b.size() != p.rows * p.dim || p.c.size() != p.rows * p.cols) {
    throw DimensionError("Carlini problem buffers do not match rows/cols/dim");
  }
}

// residual = absB - C abs(A); returns ||residual||^2.
double residual(const CarliniProblem& p, std::span<const double> a, std::vector<double>& r) {
  r.assign(p.abs_b.begin(), p.abs_b.end());
  for (std::size_t i = 0; i < p.rows; ++i) {
    for (std::size_t j = 0; j < p.cols; ++j) {
      const double cij = p.c[i * p.cols + j];
      if (cij == 0.0) continue;
      const double* arow = a.data() + j * p.dim;
      double* rrow = r.data() + i * p.dim;
      for (std::size_t t = 0; t < p.dim; ++t) rrow[t] -= cij * std::fabs(arow[t]);
    }
  }
  double f = 0.0;
  for (double v : r) f += v * v;
  return f;
}

}  // namespace

CarliniProblem make_carlini_problem(std::span<const Image> encryptions, std::span<const CoefficientRow> rows,
                                    std::size_t cols) {
  if (encryptions.empty() || encryptions.size() != rows.size()) {
    throw DimensionError("one coefficient row per encryption required");
  }
  CarliniProblem p;
  p.rows = encryptions.size();
  p.cols = cols;
  p.dim = encryptions[0].size();
  p.abs_b.reserve(p.rows * p.dim);
  p.c.assign(p.rows * p.cols, 0.0);
  for (std::size_t i = 0; i < p.rows; ++i) {
    imaging::require_same_dims(encryptions[0], encryptions[i], "Carlini problem");
    for (double v : encryptions[i].pixels) p.abs_b.push_back(std::fabs(v));
    for (auto [col, coef] : rows[i]) {
      if (col >= cols) throw DimensionError("coefficient column " + std::to_string(col) + " out of range");
      if (coef < 0.0) throw ParameterError("coefficients must be nonnegative");
      p.c[i * cols + col] += coef;
    }
  }
  return p;
}

double carlini_objective(const CarliniProblem& problem, std::span<const double> a) {
  check(problem);
  if (a.size() != problem.cols * problem.dim) throw DimensionError("A has the wrong size");
  std::vector<double> r;
  return residual(problem, a, r);
}

CarliniResult carlini_attack(const CarliniProblem& problem, const CarliniConfig& cfg) {
  check(problem);
  if (!(cfg.step_size > 0.0)) throw ParameterError("step size must be positive");
  const std::size_t n = problem.cols * problem.dim;
  CarliniResult out;
  out.a.assign(n, 0.0);
  std::vector<double> r, grad(n), trial(n), r_trial;
  double f = residual(problem, out.a, r);
  out.objective_history.push_back(f);
  double step = cfg.step_size;

  for (std::size_t it = 0; it < cfg.iterations && f > 0.0; ++it) {
    // d f / d A[j,t] = -2 sign(A[j,t]) sum_i C[i,j] r[i,t]
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < problem.rows; ++i) {
      for (std::size_t j = 0; j < problem.cols; ++j) {
        const double cij = problem.c[i * problem.cols + j];
        if (cij == 0.0) continue;
        for (std::size_t t = 0; t < problem.dim; ++t) grad[j * problem.dim + t] += cij * r[i * problem.dim + t];
      }
    }
    for (std::size_t k = 0; k < n; ++k) grad[k] *= out.a[k] < 0.0 ? 2.0 : -2.0;

    bool accepted = false;
    for (std::size_t h = 0; h <= cfg.max_halvings; ++h) {
      // f depends on abs(A) only, so folding to the nonnegative representative
      // leaves the objective unchanged and keeps the sign choice canonical.
      for (std::size_t k = 0; k < n; ++k) trial[k] = std::fabs(std::clamp(out.a[k] - step * grad[k], -1.0, 1.0));
      const double ft = residual(problem, trial, r_trial);
      if (!std::isfinite(ft)) throw DataError("Carlini objective became non-finite");
      // Strict decrease: equal-objective steps can cycle between two points.
      if (ft < f) {
        out.a.swap(trial);
        r.swap(r_trial);
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    out.objective_history.push_back(f);
    if (!accepted) break;
  }
  out.objective = f;
  return out;
}

Image carlini_image(const CarliniResult& result, std::size_t col, std::size_t height, std::size_t width) {
  const std::size_t dim = Image::kChannels * height * width;
  if ((col + 1) * dim > result.a.size()) throw DimensionError("column outside the Carlini solution");
  return Image(height, width, std::vector<double>(result.a.begin() + col * dim, result.a.begin() + (col + 1) * dim));
}

Image averaging_attack(std::span<const Image> members, std::span<const double> lambdas) {
  if (members.empty()) throw DataError("averaging needs at least one member");
  auto rw = restoration::reweight(members, lambdas);
  std::vector<ad::Tensor> parts;
  for (const auto& img : rw.images) parts.push_back(imaging::to_tensor(img));
  Image mean = imaging::from_tensor(ad::stack_mean(parts));
  return imaging::clamp_image(mean, 0.0, 1.0);
}

}  // namespace mixcrypt::baselines
