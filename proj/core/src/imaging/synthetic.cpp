// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/imaging/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace mixcrypt::imaging {

namespace {

using Color = std::array<double, 3>;

// Luminance plus a moderate chroma offset keeps channels correlated.
Color random_color(Rng& rng) {
  const double lum = uniform(rng, -0.9, 0.9);
  Color c;
  for (auto& v : c) v = std::clamp(lum + uniform(rng, -0.4, 0.4), -1.0, 1.0);
  return c;
}

void box_blur(Image& image) {
  Image src = image;
  const auto h = static_cast<std::ptrdiff_t>(image.height), w = static_cast<std::ptrdiff_t>(image.width);
  for (std::size_t c = 0; c < Image::kChannels; ++c)
    for (std::ptrdiff_t y = 0; y < h; ++y)
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        int n = 0;
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
          for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
            const auto yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            acc += src.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            ++n;
          }
        image.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc / n;
      }
}

}  // namespace

Image synthesize_image(std::size_t height, std::size_t width, SyntheticStyle style, Rng& rng,
                       std::optional<std::size_t> class_id) {
  Image image(height, width);
  const double H = static_cast<double>(height), W = static_cast<double>(width);

  // Without a class every colour is fresh; with one, colours are drawn once
  // per class and jittered per image.
  Rng palette_rng(class_id ? stage_seed(*class_id, "synthetic-palette") : 0);
  const double jitter = 0.15;
  auto pick = [&](std::size_t) {
    if (!class_id) return random_color(rng);
    Color c = random_color(palette_rng);
    for (auto& v : c) v = std::clamp(v + uniform(rng, -jitter, jitter), -1.0, 1.0);
    return c;
  };
  const bool class_disc = uniform01(palette_rng) < 0.5;

  const Color from = pick(0), to = pick(1);
  const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double gx = std::cos(angle), gy = std::sin(angle);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double t = 0.5 + 0.5 * ((x / W - 0.5) * gx + (y / H - 0.5) * gy) * std::numbers::sqrt2;
      for (std::size_t c = 0; c < 3; ++c) image.at(c, y, x) = (1 - t) * from[c] + t * to[c];
    }

  if (style == SyntheticStyle::texture) {
    const int gratings = 2;
    for (int g = 0; g < gratings; ++g) {
      const double freq = uniform(rng, 1.0, 5.0) * 2.0 * std::numbers::pi;
      const double theta = uniform(rng, 0.0, std::numbers::pi);
      const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double amp = uniform(rng, 0.2, 0.5);
      const Color tint = random_color(rng);
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
          const double s = amp * std::sin(freq * (std::cos(theta) * x / W + std::sin(theta) * y / H) + phase);
          for (std::size_t c = 0; c < 3; ++c) image.at(c, y, x) += s * tint[c];
        }
    }
  }

  const std::size_t shapes = 1 + uniform_index(rng, 3);
  for (std::size_t s = 0; s < shapes; ++s) {
    const Color color = pick(2 + s);
    const double cx = uniform(rng, 0.2, 0.8) * W, cy = uniform(rng, 0.2, 0.8) * H;
    const double rx = uniform(rng, 0.12, 0.3) * W, ry = uniform(rng, 0.12, 0.3) * H;
    const bool disc = class_id ? class_disc : uniform01(rng) < 0.5;
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double u = (x - cx) / rx, v = (y - cy) / ry;
        const bool inside = disc ? (u * u + v * v <= 1.0) : (std::fabs(u) <= 1.0 && std::fabs(v) <= 1.0);
        if (!inside) continue;
        for (std::size_t c = 0; c < 3; ++c) image.at(c, y, x) = color[c];
      }
  }

  box_blur(image);
  for (auto& v : image.pixels) v = std::clamp(v, -1.0, 1.0);
  return image;
}

std::vector<Image> synthesize_images(std::size_t count, std::size_t height, std::size_t width, SyntheticStyle style,
                                     Rng& rng) {
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthesize_image(height, width, style, rng));
  return out;
}

Image to_nonnegative(const Image& image) {
  Image out = image;
  for (auto& v : out.pixels) v = (v + 1.0) / 2.0;
  return out;
}

}  // namespace mixcrypt::imaging
