// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mixcrypt/autodiff/ops.hpp"
#include "mixcrypt/rng.hpp"

namespace mixcrypt::ad {

using NamedParameters = std::vector<std::pair<std::string, Tensor>>;

/// Uniform fan-in initialisation, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

struct Dense {
  Tensor weights;  // [out, in]
  Tensor bias;     // [out]

  Dense() = default;
  Dense(std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return dense(x, weights, bias); }
  void collect(const std::string& prefix, NamedParameters& out) const;
};

struct Conv2d {
  Tensor kernels;  // [out, in, k, k]
  Tensor bias;     // [out]
  std::size_t stride = 1;
  std::size_t padding = 0;

  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t padding, Rng& rng);
  Tensor operator()(const Tensor& x) const { return conv2d(x, kernels, bias, stride, padding); }
  void collect(const std::string& prefix, NamedParameters& out) const;
};

struct ConvTranspose2d {
  Tensor kernels;  // [in, out, k, k]
  Tensor bias;     // [out]
  std::size_t stride = 2;
  std::size_t padding = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t padding, Rng& rng);
  /// output_padding is chosen so that the output is exactly target_h x target_w.
  Tensor operator()(const Tensor& x, std::size_t target_h, std::size_t target_w) const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

/// conv -> relu -> conv, added to the input, then relu unless post_relu is
/// off (the denoiser keeps a pure identity skip).
struct ResidualBlock {
  Conv2d first;
  Conv2d second;
  bool post_relu = true;

  ResidualBlock() = default;
  ResidualBlock(std::size_t channels, Rng& rng, bool post_relu = true);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

std::vector<Tensor> parameter_list(const NamedParameters& named);

}  // namespace mixcrypt::ad
