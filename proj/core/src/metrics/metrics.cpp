// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/metrics/metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "mixcrypt/autodiff/ops.hpp"
#include "mixcrypt/errors.hpp"

namespace mixcrypt::metrics {

namespace {

using imaging::Image;

void check_window(std::size_t h, std::size_t w, const SsimConfig& cfg) {
  if (cfg.window == 0 || cfg.window > h || cfg.window > w) {
    throw DimensionError("SSIM window " + std::to_string(cfg.window) + " does not fit " + std::to_string(h) + "x" +
                         std::to_string(w));
  }
}

// Summed-area table with a zero first row and column.
struct Integral {
  std::size_t w1;
  std::vector<double> s;
  Integral(std::size_t h, std::size_t w) : w1(w + 1), s((h + 1) * (w + 1), 0.0) {}
  double& at(std::size_t y, std::size_t x) { return s[y * w1 + x]; }
  double box(std::size_t y, std::size_t x, std::size_t k) const {
    return s[(y + k) * w1 + x + k] - s[y * w1 + x + k] - s[(y + k) * w1 + x] + s[y * w1 + x];
  }
};

}  // namespace

double mssim(const Image& a, const Image& b, const SsimConfig& cfg) {
  imaging::require_same_dims(a, b, "mssim");
  check_window(a.height, a.width, cfg);
  const std::size_t H = a.height, W = a.width, k = cfg.window;
  const double n = static_cast<double>(k * k), c1 = cfg.c1(), c2 = cfg.c2();
  double total = 0.0;
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    Integral sa(H, W), sb(H, W), saa(H, W), sbb(H, W), sab(H, W);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double u = a.at(c, y, x), v = b.at(c, y, x);
        auto acc = [&](Integral& t, double val) {
          t.at(y + 1, x + 1) = val + t.at(y, x + 1) + t.at(y + 1, x) - t.at(y, x);
        };
        acc(sa, u);
        acc(sb, v);
        acc(saa, u * u);
        acc(sbb, v * v);
        acc(sab, u * v);
      }
    }
    for (std::size_t y = 0; y + k <= H; ++y) {
      for (std::size_t x = 0; x + k <= W; ++x) {
        const double ma = sa.box(y, x, k) / n, mb = sb.box(y, x, k) / n;
        const double va = saa.box(y, x, k) / n - ma * ma, vb = sbb.box(y, x, k) / n - mb * mb;
        const double cov = sab.box(y, x, k) / n - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
    }
  }
  const double windows = static_cast<double>(Image::kChannels * (H - k + 1) * (W - k + 1));
  return total / windows;
}

double l1_loss(const Image& a, const Image& b) {
  imaging::require_same_dims(a, b, "l1_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a.pixels[i] - b.pixels[i]);
  return acc / static_cast<double>(a.size());
}

double l2_loss(const Image& a, const Image& b) {
  imaging::require_same_dims(a, b, "l2_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a.pixels[i] - b.pixels[i]) * (a.pixels[i] - b.pixels[i]);
  return acc / static_cast<double>(a.size());
}

ad::Tensor mssim(const ad::Tensor& a, const ad::Tensor& b, const SsimConfig& cfg) {
  if (a.shape() != b.shape() || a.rank() != 3) throw DimensionError("mssim expects equal [C, H, W] tensors");
  check_window(a.dim(1), a.dim(2), cfg);
  using namespace ad;
  const std::size_t k = cfg.window;
  Tensor ma = box_filter(a, k), mb = box_filter(b, k);
  Tensor va = sub(box_filter(square(a), k), square(ma));
  Tensor vb = sub(box_filter(square(b), k), square(mb));
  Tensor cov = sub(box_filter(mul(a, b), k), mul(ma, mb));
  Tensor num = mul(add_scalar(mul_scalar(mul(ma, mb), 2.0), cfg.c1()), add_scalar(mul_scalar(cov, 2.0), cfg.c2()));
  Tensor den = mul(add_scalar(add(square(ma), square(mb)), cfg.c1()), add_scalar(add(va, vb), cfg.c2()));
  return ad::mean(div(num, den));
}

ad::Tensor l1_loss(const ad::Tensor& a, const ad::Tensor& b) { return ad::mean(ad::abs(ad::sub(a, b))); }

ad::Tensor l2_loss(const ad::Tensor& a, const ad::Tensor& b) { return ad::mean(ad::square(ad::sub(a, b))); }

ad::Tensor combined_loss(const ad::Tensor& a, const ad::Tensor& b, double lambda_mssim, const SsimConfig& cfg) {
  if (!(lambda_mssim >= 0.0 && lambda_mssim <= 1.0)) throw ParameterError("lambda_mssim must lie in [0, 1]");
  using namespace ad;
  Tensor structural = add_scalar(neg(mssim(a, b, cfg)), 1.0);
  if (lambda_mssim == 1.0) return structural;
  Tensor pixel = l1_loss(a, b);
  if (lambda_mssim == 0.0) return pixel;
  return add(mul_scalar(structural, lambda_mssim), mul_scalar(pixel, 1.0 - lambda_mssim));
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "combined") return LossKind::combined;
  if (name == "l1") return LossKind::l1;
  if (name == "l2") return LossKind::l2;
  throw ParameterError("unknown loss '" + std::string(name) + "' (expected combined, l1 or l2)");
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::combined: return "combined";
    case LossKind::l1: return "l1";
    case LossKind::l2: return "l2";
  }
  return "unknown";
}

ad::Tensor training_loss(LossKind kind, const ad::Tensor& output, const ad::Tensor& target, double lambda_mssim) {
  switch (kind) {
    case LossKind::combined: return combined_loss(output, target, lambda_mssim);
    case LossKind::l1: return l1_loss(output, target);
    case LossKind::l2: return l2_loss(output, target);
  }
  throw ParameterError("unknown loss kind");
}

}  // namespace mixcrypt::metrics
