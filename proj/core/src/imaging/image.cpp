// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/imaging/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::imaging {

Image::Image(std::size_t height, std::size_t width, double fill)
    : height(height), width(width), pixels(kChannels * height * width, fill) {
  if (height == 0 || width == 0) throw DimensionError("image dimensions must be positive");
}

Image::Image(std::size_t height, std::size_t width, std::vector<double> pixels)
    : height(height), width(width), pixels(std::move(pixels)) {
  if (height == 0 || width == 0) throw DimensionError("image dimensions must be positive");
  if (this->pixels.size() != kChannels * height * width) {
    throw DimensionError("image " + std::to_string(height) + "x" + std::to_string(width) + " given " +
                         std::to_string(this->pixels.size()) + " values");
  }
}

void require_same_dims(const Image& a, const Image& b, const char* what) {
  if (!a.same_dims(b)) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                         " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

ad::Tensor to_tensor(const Image& image, bool requires_grad) {
  return ad::Tensor::from({Image::kChannels, image.height, image.width}, image.pixels, requires_grad);
}

Image from_tensor(const ad::Tensor& tensor) {
  if (tensor.rank() != 3 || tensor.dim(0) != Image::kChannels) {
    throw DimensionError("expected a [3,H,W] tensor, got " + ad::shape_string(tensor.shape()));
  }
  return Image(tensor.dim(1), tensor.dim(2), std::vector<double>(tensor.data().begin(), tensor.data().end()));
}

Image abs_image(const Image& m) {
  Image out = m;
  for (auto& v : out.pixels) v = std::fabs(v);
  return out;
}

double image_variance(const Image& m) {
  // Shifted by the first pixel so that a constant image gives exactly 0.
  const double n = static_cast<double>(m.size());
  const double shift = m.pixels.empty() ? 0.0 : m.pixels.front();
  double s1 = 0.0, s2 = 0.0;
  for (double v : m.pixels) {
    s1 += v - shift;
    s2 += (v - shift) * (v - shift);
  }
  return std::max(0.0, (s2 - s1 * s1 / n) / n);
}

Image clamp_image(const Image& m, double lo, double hi) {
  Image out = m;
  for (auto& v : out.pixels) v = std::clamp(v, lo, hi);
  return out;
}

Image scale_image(const Image& m, double factor) {
  Image out = m;
  for (auto& v : out.pixels) v *= factor;
  return out;
}

Image central_crop16(const Image& m) {
  constexpr std::size_t kSide = 16;
  if (m.height < kSide || m.width < kSide) {
    throw DimensionError("central_crop16 needs at least 16x16, got " + std::to_string(m.height) + "x" +
                         std::to_string(m.width));
  }
  const std::size_t y0 = (m.height - kSide) / 2, x0 = (m.width - kSide) / 2;
  Image out(kSide, kSide);
  for (std::size_t c = 0; c < Image::kChannels; ++c)
    for (std::size_t y = 0; y < kSide; ++y)
      for (std::size_t x = 0; x < kSide; ++x) out.at(c, y, x) = m.at(c, y0 + y, x0 + x);
  return out;
}

Image downsample2(const Image& m) {
  const std::size_t h = (m.height + 1) / 2, w = (m.width + 1) / 2;
  Image out(h, w);
  for (std::size_t c = 0; c < Image::kChannels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        int count = 0;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t sy = 2 * y + dy, sx = 2 * x + dx;
            if (sy < m.height && sx < m.width) {
              acc += m.at(c, sy, sx);
              ++count;
            }
          }
        out.at(c, y, x) = acc / count;
      }
  return out;
}

Image upsample2(const Image& m, std::size_t height, std::size_t width) {
  if ((height + 1) / 2 != m.height || (width + 1) / 2 != m.width) {
    throw DimensionError("upsample2: " + std::to_string(m.height) + "x" + std::to_string(m.width) +
                         " cannot duplicate to " + std::to_string(height) + "x" + std::to_string(width));
  }
  Image out(height, width);
  for (std::size_t c = 0; c < Image::kChannels; ++c)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) out.at(c, y, x) = m.at(c, y / 2, x / 2);
  return out;
}

}  // namespace mixcrypt::imaging
