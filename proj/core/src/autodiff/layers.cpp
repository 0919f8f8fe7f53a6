// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/autodiff/layers.hpp"

#include <cmath>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::ad {

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = uniform(rng, -bound, bound);
  return Tensor::from(std::move(shape), std::move(values), true);
}

Dense::Dense(std::size_t in, std::size_t out, Rng& rng)
    : weights(init_uniform({out, in}, in, rng)), bias(init_uniform({out}, in, rng)) {}

void Dense::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".weights", weights);
  out.emplace_back(prefix + ".bias", bias);
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t padding, Rng& rng)
    : kernels(init_uniform({out, in, k, k}, in * k * k, rng)),
      bias(init_uniform({out}, in * k * k, rng)),
      stride(stride),
      padding(padding) {}

void Conv2d::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".kernels", kernels);
  out.emplace_back(prefix + ".bias", bias);
}

ConvTranspose2d::ConvTranspose2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                                 std::size_t padding, Rng& rng)
    : kernels(init_uniform({in, out, k, k}, in * k * k, rng)),
      bias(init_uniform({out}, in * k * k, rng)),
      stride(stride),
      padding(padding) {}

Tensor ConvTranspose2d::operator()(const Tensor& x, std::size_t target_h, std::size_t target_w) const {
  const std::size_t k = kernels.dim(2);
  auto base = [&](std::size_t n) {
    return static_cast<std::ptrdiff_t>((n - 1) * stride + k) - 2 * static_cast<std::ptrdiff_t>(padding);
  };
  const auto pad_h = static_cast<std::ptrdiff_t>(target_h) - base(x.dim(1));
  const auto pad_w = static_cast<std::ptrdiff_t>(target_w) - base(x.dim(2));
  const auto s = static_cast<std::ptrdiff_t>(stride);
  if (pad_h < 0 || pad_w < 0 || pad_h >= s || pad_w >= s) {
    throw DimensionError("transposed conv cannot map " + shape_string(x.shape()) + " to " + std::to_string(target_h) +
                         "x" + std::to_string(target_w));
  }
  return conv_transpose2d(x, kernels, bias, stride, padding, static_cast<std::size_t>(pad_h),
                          static_cast<std::size_t>(pad_w));
}

void ConvTranspose2d::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".kernels", kernels);
  out.emplace_back(prefix + ".bias", bias);
}

ResidualBlock::ResidualBlock(std::size_t channels, Rng& rng, bool post_relu)
    : first(channels, channels, 3, 1, 1, rng), second(channels, channels, 3, 1, 1, rng), post_relu(post_relu) {}

Tensor ResidualBlock::operator()(const Tensor& x) const {
  Tensor y = add(x, second(relu(first(x))));
  return post_relu ? relu(y) : y;
}

void ResidualBlock::collect(const std::string& prefix, NamedParameters& out) const {
  first.collect(prefix + ".first", out);
  second.collect(prefix + ".second", out);
}

std::vector<Tensor> parameter_list(const NamedParameters& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

}  // namespace mixcrypt::ad
