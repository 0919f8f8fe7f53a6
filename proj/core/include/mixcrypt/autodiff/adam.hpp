// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mixcrypt/autodiff/tensor.hpp"

namespace mixcrypt::ad {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step_count = 0;
};

/// Bias-corrected Adam update of every parameter from its accumulated grad.
/// Parameters without a grad are treated as having a zero gradient. The
/// moment buffers are sized on the first call and must keep matching.
void adam_step(std::span<Tensor> params, AdamState& state);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  void step() { adam_step(params_, state_); }
  void zero_grad();
  const AdamState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace mixcrypt::ad
