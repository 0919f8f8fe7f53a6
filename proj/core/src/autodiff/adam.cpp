// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/autodiff/adam.hpp"

#include <cmath>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::ad {

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.first_moment.empty() && state.step_count == 0) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].numel()) {
      throw DimensionError("adam_step: moment buffer does not match parameter " + std::to_string(i));
    }
  }

  const auto& cfg = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].data();
    auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)) { state_.config = config; }

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace mixcrypt::ad
