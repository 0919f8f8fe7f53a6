// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "mixcrypt/imaging/image.hpp"
#include "mixcrypt/rng.hpp"

namespace mixcrypt::imaging {

enum class SyntheticStyle {
  /// Smooth colour gradient with a few filled discs and rectangles.
  shapes,
  /// Sinusoidal gratings over a gradient; stands in for the public pool.
  texture,
};

/// Procedural picture in [-1, 1] used in place of a natural-image corpus.
/// With a class id, colours come from a fixed per-class palette plus a
/// small jitter, so that classes carry colour priors the way natural image
/// classes do.
Image synthesize_image(std::size_t height, std::size_t width, SyntheticStyle style, Rng& rng,
                       std::optional<std::size_t> class_id = std::nullopt);

std::vector<Image> synthesize_images(std::size_t count, std::size_t height, std::size_t width, SyntheticStyle style,
                                     Rng& rng);

/// Maps [-1, 1] onto [0, 1] via (v + 1) / 2.
Image to_nonnegative(const Image& image);

}  // namespace mixcrypt::imaging
