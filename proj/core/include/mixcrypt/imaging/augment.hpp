// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

#include "mixcrypt/imaging/image.hpp"
#include "mixcrypt/rng.hpp"

namespace mixcrypt::imaging {

enum class AugmentKind : std::uint8_t { identity = 0, rotation = 1, translation = 2, crop_resize = 3, composite = 4 };

const char* to_string(AugmentKind kind);

/// Geometric transform of a W x H frame. Pixel centres sit at integer
/// coordinates. The forward map sends an original pixel p to
///   crop( translate( rotate(p) ) )
/// where rotate turns about the frame centre, translate shifts content by
/// (dx, dy) and crop takes box (crop_x0, crop_y0, crop_w, crop_h) in edge
/// coordinates and resizes it back to W x H. Fields that a kind does not use
/// stay at their neutral values.
struct AugmentParams {
  AugmentKind kind = AugmentKind::identity;
  double rotation_degrees = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double crop_x0 = 0.0;
  double crop_y0 = 0.0;
  double crop_w = 0.0;  // 0 means the full frame
  double crop_h = 0.0;
  double epsilon_bound = 0.0;

  static AugmentParams identity() { return {}; }
  static AugmentParams translation(double dx, double dy);
  static AugmentParams rotation(double degrees);
  static AugmentParams crop_resize(double x0, double y0, double w, double h);

  bool operator==(const AugmentParams&) const = default;
};

/// 2-D affine map q = A p + b.
struct Affine {
  std::array<double, 4> a{1, 0, 0, 1};  // row-major 2x2
  std::array<double, 2> b{0, 0};

  std::array<double, 2> apply(double x, double y) const {
    return {a[0] * x + a[1] * y + b[0], a[2] * x + a[3] * y + b[1]};
  }
  Affine inverse() const;
};

Affine forward_map(const AugmentParams& params, std::size_t width, std::size_t height);

/// Resamples `image` under `params`: bilinear, out-of-frame filled with 0,
/// result clamped to [-1, 1].
Image apply_augment(const Image& image, const AugmentParams& params);

/// Smallest epsilon for which mapping every pixel p through a and through b
/// keeps |dx| <= (eps/2) W and |dy| <= (eps/2) H. Evaluated on every pixel of
/// the source grid, including pixels that leave the frame, so the result is
/// a pseudometric (symmetric, triangle inequality).
double epsilon_distance(const AugmentParams& a, const AugmentParams& b, std::size_t width, std::size_t height);

/// epsilon_distance from the identity.
double epsilon_of(const AugmentParams& params, std::size_t width, std::size_t height);

/// True iff params is an epsilon-augmentation of the original frame.
bool satisfies_bound(const AugmentParams& params, double epsilon, std::size_t width, std::size_t height);

/// Draws a random transform with displacement bounded by epsilon. The kind
/// is uniform over {translation, rotation, crop_resize}; epsilon = 0 gives
/// the identity.
AugmentParams sample_augment(double epsilon, std::size_t width, std::size_t height, Rng& rng);

struct AugmentedImage {
  Image image;
  AugmentParams params;
  std::int64_t source_id = -1;
  std::uint32_t copy_index = 0;
};

/// sample_augment followed by apply_augment. epsilon must lie in [0, 1].
AugmentedImage augment(const Image& image, double epsilon, Rng& rng);

}  // namespace mixcrypt::imaging
