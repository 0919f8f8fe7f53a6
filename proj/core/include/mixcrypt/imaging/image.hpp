// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "mixcrypt/autodiff/tensor.hpp"

namespace mixcrypt::imaging {

/// Three-channel picture stored channel-first ([3][H][W], row-major).
/// Plain images live in [-1, 1]; abs-preprocessed encryptions in [0, 1].
struct Image {
  static constexpr std::size_t kChannels = 3;

  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 0.0);
  Image(std::size_t height, std::size_t width, std::vector<double> pixels);

  std::size_t plane() const { return height * width; }
  std::size_t size() const { return pixels.size(); }
  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }
  bool same_dims(const Image& other) const { return height == other.height && width == other.width; }

  bool operator==(const Image&) const = default;
};

ad::Tensor to_tensor(const Image& image, bool requires_grad = false);
/// Expects a [3, H, W] tensor.
Image from_tensor(const ad::Tensor& tensor);

Image abs_image(const Image& m);
/// Population variance over every pixel of every channel.
double image_variance(const Image& m);
Image clamp_image(const Image& m, double lo, double hi);
Image scale_image(const Image& m, double factor);

/// Centered 16x16 window; requires H, W >= 16.
Image central_crop16(const Image& m);
/// Averages disjoint 2x2 blocks, ceil(H/2) x ceil(W/2); partial edge blocks
/// average the pixels they contain.
Image downsample2(const Image& m);
/// Pixel duplication back to height x width.
Image upsample2(const Image& m, std::size_t height, std::size_t width);

void require_same_dims(const Image& a, const Image& b, const char* what);

}  // namespace mixcrypt::imaging
