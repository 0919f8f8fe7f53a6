// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/imaging/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::imaging {

namespace {

Affine compose(const Affine& outer, const Affine& inner) {
  Affine r;
  r.a = {outer.a[0] * inner.a[0] + outer.a[1] * inner.a[2], outer.a[0] * inner.a[1] + outer.a[1] * inner.a[3],
         outer.a[2] * inner.a[0] + outer.a[3] * inner.a[2], outer.a[2] * inner.a[1] + outer.a[3] * inner.a[3]};
  r.b = {outer.a[0] * inner.b[0] + outer.a[1] * inner.b[1] + outer.b[0],
         outer.a[2] * inner.b[0] + outer.a[3] * inner.b[1] + outer.b[1]};
  return r;
}

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ParameterError("epsilon must lie in [0, 1], got " + std::to_string(epsilon));
  }
}

// Largest t in [0, 1] with bound(make(t)) holding, assuming it holds at t=0.
template <class Make>
double max_magnitude(Make make, double epsilon, std::size_t w, std::size_t h) {
  if (satisfies_bound(make(1.0), epsilon, w, h)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    (satisfies_bound(make(mid), epsilon, w, h) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

const char* to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::identity: return "identity";
    case AugmentKind::rotation: return "rotation";
    case AugmentKind::translation: return "translation";
    case AugmentKind::crop_resize: return "crop_resize";
    case AugmentKind::composite: return "composite";
  }
  return "unknown";
}

AugmentParams AugmentParams::translation(double dx, double dy) {
  AugmentParams p;
  p.kind = AugmentKind::translation;
  p.dx = dx;
  p.dy = dy;
  return p;
}

AugmentParams AugmentParams::rotation(double degrees) {
  AugmentParams p;
  p.kind = AugmentKind::rotation;
  p.rotation_degrees = degrees;
  return p;
}

AugmentParams AugmentParams::crop_resize(double x0, double y0, double w, double h) {
  AugmentParams p;
  p.kind = AugmentKind::crop_resize;
  p.crop_x0 = x0;
  p.crop_y0 = y0;
  p.crop_w = w;
  p.crop_h = h;
  return p;
}

Affine Affine::inverse() const {
  const double det = a[0] * a[3] - a[1] * a[2];
  if (det == 0.0) throw ParameterError("singular geometric transform");
  Affine r;
  r.a = {a[3] / det, -a[1] / det, -a[2] / det, a[0] / det};
  r.b = {-(r.a[0] * b[0] + r.a[1] * b[1]), -(r.a[2] * b[0] + r.a[3] * b[1])};
  return r;
}

Affine forward_map(const AugmentParams& params, std::size_t width, std::size_t height) {
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  const double cx = (W - 1.0) / 2.0, cy = (H - 1.0) / 2.0;

  Affine rot;
  if (params.rotation_degrees != 0.0) {
    const double t = params.rotation_degrees * std::numbers::pi / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    rot.a = {c, -s, s, c};
    rot.b = {cx - (c * cx - s * cy), cy - (s * cx + c * cy)};
  }
  Affine shift;
  shift.b = {params.dx, params.dy};

  Affine crop;
  const double cw = params.crop_w > 0.0 ? params.crop_w : W;
  const double ch = params.crop_h > 0.0 ? params.crop_h : H;
  // q = (p + 0.5 - x0) * W / cw - 0.5
  crop.a = {W / cw, 0.0, 0.0, H / ch};
  crop.b = {(0.5 - params.crop_x0) * W / cw - 0.5, (0.5 - params.crop_y0) * H / ch - 0.5};

  return compose(crop, compose(shift, rot));
}

Image apply_augment(const Image& image, const AugmentParams& params) {
  const std::size_t w = image.width, h = image.height;
  const Affine inv = forward_map(params, w, h).inverse();
  const double W = static_cast<double>(w), H = static_cast<double>(h);
  Image out(h, w, 0.0);
  for (std::size_t qy = 0; qy < h; ++qy) {
    for (std::size_t qx = 0; qx < w; ++qx) {
      auto [px, py] = inv.apply(static_cast<double>(qx), static_cast<double>(qy));
      if (px < -0.5 || px > W - 0.5 || py < -0.5 || py > H - 0.5) continue;
      px = std::clamp(px, 0.0, W - 1.0);
      py = std::clamp(py, 0.0, H - 1.0);
      const auto x0 = static_cast<std::size_t>(std::floor(px)), y0 = static_cast<std::size_t>(std::floor(py));
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = px - static_cast<double>(x0), fy = py - static_cast<double>(y0);
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const double top = (1 - fx) * image.at(c, y0, x0) + fx * image.at(c, y0, x1);
        const double bottom = (1 - fx) * image.at(c, y1, x0) + fx * image.at(c, y1, x1);
        out.at(c, qy, qx) = std::clamp((1 - fy) * top + fy * bottom, -1.0, 1.0);
      }
    }
  }
  return out;
}

double epsilon_distance(const AugmentParams& a, const AugmentParams& b, std::size_t width, std::size_t height) {
  const Affine fa = forward_map(a, width, height), fb = forward_map(b, width, height);
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  double worst = 0.0;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      auto qa = fa.apply(static_cast<double>(x), static_cast<double>(y));
      auto qb = fb.apply(static_cast<double>(x), static_cast<double>(y));
      worst = std::max({worst, 2.0 * std::fabs(qa[0] - qb[0]) / W, 2.0 * std::fabs(qa[1] - qb[1]) / H});
    }
  }
  return worst;
}

double epsilon_of(const AugmentParams& params, std::size_t width, std::size_t height) {
  return epsilon_distance(AugmentParams::identity(), params, width, height);
}

bool satisfies_bound(const AugmentParams& params, double epsilon, std::size_t width, std::size_t height) {
  return epsilon_of(params, width, height) <= epsilon + 1e-12;
}

AugmentParams sample_augment(double epsilon, std::size_t width, std::size_t height, Rng& rng) {
  check_epsilon(epsilon);
  if (epsilon == 0.0) return AugmentParams::identity();
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  AugmentParams out;
  switch (uniform_index(rng, 3)) {
    case 0: {
      out = AugmentParams::translation(uniform(rng, -1.0, 1.0) * epsilon * W / 2.0,
                                       uniform(rng, -1.0, 1.0) * epsilon * H / 2.0);
      break;
    }
    case 1: {
      auto make = [](double t) { return AugmentParams::rotation(180.0 * t); };
      const double t_max = max_magnitude(make, epsilon, width, height);
      out = make(uniform(rng, -1.0, 1.0) * t_max);
      break;
    }
    default: {
      const double ax = uniform01(rng), ay = uniform01(rng), u = uniform01(rng);
      // t = 1 is the smallest crop considered, t = 0 the full frame.
      auto make = [&](double t) {
        const double scale = 1.0 - t * (1.0 - 1.0 / (1.0 + epsilon));
        const double cw = scale * W, ch = scale * H;
        return AugmentParams::crop_resize(ax * (W - cw), ay * (H - ch), cw, ch);
      };
      const double t_max = max_magnitude(make, epsilon, width, height);
      out = make(u * t_max);
      break;
    }
  }
  out.epsilon_bound = epsilon;
  return out;
}

AugmentedImage augment(const Image& image, double epsilon, Rng& rng) {
  check_epsilon(epsilon);
  AugmentedImage out;
  out.params = sample_augment(epsilon, image.width, image.height, rng);
  out.image = out.params.kind == AugmentKind::identity ? clamp_image(image, -1.0, 1.0)
                                                        : apply_augment(image, out.params);
  return out;
}

}  // namespace mixcrypt::imaging
