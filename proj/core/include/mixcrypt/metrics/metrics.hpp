// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>

#include "mixcrypt/autodiff/tensor.hpp"
#include "mixcrypt/imaging/image.hpp"

namespace mixcrypt::metrics {

/// Uniform window, stride 1, population moments.
struct SsimConfig {
  std::size_t window = 8;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 2.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

/// Mean SSIM over every window position of every channel.
double mssim(const imaging::Image& a, const imaging::Image& b, const SsimConfig& cfg = {});
double l1_loss(const imaging::Image& a, const imaging::Image& b);
double l2_loss(const imaging::Image& a, const imaging::Image& b);

// Differentiable versions over [C, H, W] tensors.
ad::Tensor mssim(const ad::Tensor& a, const ad::Tensor& b, const SsimConfig& cfg = {});
ad::Tensor l1_loss(const ad::Tensor& a, const ad::Tensor& b);
ad::Tensor l2_loss(const ad::Tensor& a, const ad::Tensor& b);

/// lambda * (1 - mssim) + (1 - lambda) * l1. lambda in [0, 1].
ad::Tensor combined_loss(const ad::Tensor& a, const ad::Tensor& b, double lambda_mssim = 0.7,
                         const SsimConfig& cfg = {});

enum class LossKind { combined, l1, l2 };

LossKind parse_loss_kind(std::string_view name);
const char* to_string(LossKind kind);

ad::Tensor training_loss(LossKind kind, const ad::Tensor& output, const ad::Tensor& target, double lambda_mssim = 0.7);

}  // namespace mixcrypt::metrics
