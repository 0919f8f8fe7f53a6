// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::ad {

namespace {

using Index = std::ptrdiff_t;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(a.shape()));
  }
}

Node& parent(Node& out, std::size_t i) { return *out.parents[i]; }

// y = f(x); dy/dx given as d(x, y).
template <class F, class D>
Tensor unary(const Tensor& a, F f, D d) {
  auto x = a.data();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return make_result(a.shape(), std::move(y), {a}, [d](Node& out) {
    Node& p = parent(out, 0);
    auto& pg = p.grad_buffer();
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += out.grad[i] * d(p.data[i], out.data[i]);
  });
}

// Output range [lo, hi) of o such that o*stride + offset lies in [0, limit).
std::pair<Index, Index> valid_range(Index count, Index stride, Index offset, Index limit) {
  Index lo = 0;
  if (offset < 0) lo = (-offset + stride - 1) / stride;
  Index hi = (limit - offset + stride - 1) / stride;
  if (limit - offset <= 0) hi = 0;
  hi = std::min(hi, count);
  return {lo, std::max(lo, hi)};
}

// Shared loop nest of conv2d and its adjoint. For each kernel tap, visits the
// rows of the "small" grid (stride-s lattice) and the matching rows of the
// "big" grid. kernel_index(a, b, ky, kx) maps channel pair to a flat index.
//   mode 0: small[a] += w * big[b]        (conv forward)
//   mode 1: big[b]   += w * small[a]      (conv input-grad / transposed forward)
//   mode 2: w        += small[a] * big[b] (kernel grad)
template <int Mode, class KernelIndex>
void strided_correlate(double* small, Index small_ch, Index sh, Index sw, double* big, Index big_ch, Index bh,
                       Index bw, double* kernels, Index kh, Index kw, Index stride, Index pad,
                       KernelIndex kernel_index) {
  for (Index a = 0; a < small_ch; ++a) {
    for (Index b = 0; b < big_ch; ++b) {
      for (Index ky = 0; ky < kh; ++ky) {
        auto [y0, y1] = valid_range(sh, stride, ky - pad, bh);
        for (Index kx = 0; kx < kw; ++kx) {
          auto [x0, x1] = valid_range(sw, stride, kx - pad, bw);
          if (x0 >= x1 || y0 >= y1) continue;
          double& w = kernels[kernel_index(a, b, ky, kx)];
          double acc = 0.0;
          for (Index oy = y0; oy < y1; ++oy) {
            double* srow = small + (a * sh + oy) * sw;
            double* brow = big + (b * bh + oy * stride + ky - pad) * bw + (kx - pad);
            if constexpr (Mode == 0) {
              const double wv = w;
              if (stride == 1) {
                for (Index ox = x0; ox < x1; ++ox) srow[ox] += wv * brow[ox];
              } else {
                for (Index ox = x0; ox < x1; ++ox) srow[ox] += wv * brow[ox * stride];
              }
            } else if constexpr (Mode == 1) {
              const double wv = w;
              if (stride == 1) {
                for (Index ox = x0; ox < x1; ++ox) brow[ox] += wv * srow[ox];
              } else {
                for (Index ox = x0; ox < x1; ++ox) brow[ox * stride] += wv * srow[ox];
              }
            } else {
              if (stride == 1) {
                for (Index ox = x0; ox < x1; ++ox) acc += srow[ox] * brow[ox];
              } else {
                for (Index ox = x0; ox < x1; ++ox) acc += srow[ox] * brow[ox * stride];
              }
            }
          }
          if constexpr (Mode == 2) w += acc;
        }
      }
    }
  }
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& out) {
    for (int k = 0; k < 2; ++k) {
      Node& p = parent(out, k);
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& out) {
    for (int k = 0; k < 2; ++k) {
      Node& p = parent(out, k);
      if (!p.requires_grad) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      auto& g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * out.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& out) {
    Node& pa = parent(out, 0);
    Node& pb = parent(out, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * pa.data[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] / b[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& out) {
    Node& pa = parent(out, 0);
    Node& pb = parent(out, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] / pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= out.grad[i] * out.data[i] / pb.data[i];
    }
  });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "maximum");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(a[i], b[i]);
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& out) {
    Node& pa = parent(out, 0);
    Node& pb = parent(out, 1);
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
      bool first = pa.data[i] >= pb.data[i];
      Node& p = first ? pa : pb;
      if (p.requires_grad) p.grad_buffer()[i] += out.grad[i];
    }
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result({1}, {s}, {a}, [](Node& out) {
    auto& g = parent(out, 0).grad_buffer();
    for (auto& v : g) v += out.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double n = static_cast<double>(a.numel());
  return make_result({1}, {s / n}, {a}, [n](Node& out) {
    auto& g = parent(out, 0).grad_buffer();
    for (auto& v : g) v += out.grad[0] / n;
  });
}

Tensor variance(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  double mu = 0.0;
  for (double v : a.data()) mu += v;
  mu /= n;
  double acc = 0.0;
  for (double v : a.data()) acc += (v - mu) * (v - mu);
  return make_result({1}, {acc / n}, {a}, [n, mu](Node& out) {
    Node& p = parent(out, 0);
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[0] * 2.0 * (p.data[i] - mu) / n;
  });
}

// ---- shape ---------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  std::vector<double> y(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(y), {a}, [](Node& out) {
    auto& g = parent(out, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
  });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t lead = 0;
  std::vector<double> y;
  for (const auto& p : parts) {
    if (p.rank() != tail.size() + 1 || !std::equal(tail.begin(), tail.end(), p.shape().begin() + 1)) {
      throw DimensionError("concat: trailing dims differ, " + shape_string(p.shape()));
    }
    lead += p.dim(0);
    y.insert(y.end(), p.data().begin(), p.data().end());
  }
  Shape shape{lead};
  shape.insert(shape.end(), tail.begin(), tail.end());
  return make_result(std::move(shape), std::move(y), std::vector<Tensor>(parts.begin(), parts.end()), [](Node& out) {
    std::size_t offset = 0;
    for (auto& pp : out.parents) {
      const std::size_t n = pp->data.size();
      if (pp->requires_grad) {
        auto& g = pp->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) g[i] += out.grad[offset + i];
      }
      offset += n;
    }
  });
}

// ---- linear algebra --------------------------------------------------------

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require_rank(input, 1, "dense input");
  require_rank(weights, 2, "dense weights");
  require_rank(bias, 1, "dense bias");
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  if (input.dim(0) != n || bias.dim(0) != m) {
    throw DimensionError("dense: weights " + shape_string(weights.shape()) + ", input " +
                         shape_string(input.shape()) + ", bias " + shape_string(bias.shape()));
  }
  std::vector<double> y(m);
  auto w = weights.data();
  auto x = input.data();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = bias[i];
    for (std::size_t j = 0; j < n; ++j) acc += w[i * n + j] * x[j];
    y[i] = acc;
  }
  return make_result({m}, std::move(y), {input, weights, bias}, [m, n](Node& out) {
    Node& px = parent(out, 0);
    Node& pw = parent(out, 1);
    Node& pb = parent(out, 2);
    if (px.requires_grad) {
      auto& g = px.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += out.grad[i] * pw.data[i * n + j];
    }
    if (pw.requires_grad) {
      auto& g = pw.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += out.grad[i] * px.data[j];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) g[i] += out.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) throw DimensionError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  std::vector<double> y(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      const double av = A[i * k + t];
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] += av * B[t * n + j];
    }
  return make_result({m, n}, std::move(y), {a, b}, [m, k, n](Node& out) {
    Node& pa = parent(out, 0);
    Node& pb = parent(out, 1);
    const auto& G = out.grad;
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * pb.data[t * n + j];
          g[i * k + t] += acc;
        }
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
          const double av = pa.data[i * k + t];
          for (std::size_t j = 0; j < n; ++j) g[t * n + j] += av * G[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = a[i * n + j];
  return make_result({n, m}, std::move(y), {a}, [m, n](Node& out) {
    auto& g = parent(out, 0).grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += out.grad[j * m + i];
  });
}

Tensor softmax_rows(const Tensor& a) {
  require_rank(a, 2, "softmax_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = a[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a[i * n + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (y[i * n + j] = std::exp(a[i * n + j] - mx));
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= s;
  }
  return make_result({m, n}, std::move(y), {a}, [m, n](Node& out) {
    auto& g = parent(out, 0).grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += out.grad[i * n + j] * out.data[i * n + j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += out.data[i * n + j] * (out.grad[i * n + j] - dot);
    }
  });
}

// ---- convolution -------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  const Index ci = static_cast<Index>(input.dim(0)), h = static_cast<Index>(input.dim(1)),
              w = static_cast<Index>(input.dim(2));
  const Index co = static_cast<Index>(kernels.dim(0)), kh = static_cast<Index>(kernels.dim(2)),
              kw = static_cast<Index>(kernels.dim(3));
  const Index s = static_cast<Index>(stride), p = static_cast<Index>(padding);
  if (static_cast<Index>(kernels.dim(1)) != ci) {
    throw DimensionError("conv2d: kernels " + shape_string(kernels.shape()) + " vs input " +
                         shape_string(input.shape()));
  }
  if (kh > h + 2 * p || kw > w + 2 * p) {
    throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " larger than padded input " + shape_string(input.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || static_cast<Index>(bias.dim(0)) != co)) {
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()));
  }
  const Index ho = (h + 2 * p - kh) / s + 1, wo = (w + 2 * p - kw) / s + 1;

  std::vector<double> y(static_cast<std::size_t>(co * ho * wo), 0.0);
  if (has_bias)
    for (Index c = 0; c < co; ++c) std::fill_n(y.begin() + c * ho * wo, ho * wo, bias[c]);
  auto kernel_index = [ci, kh, kw](Index a, Index b, Index ky, Index kx) { return ((a * ci + b) * kh + ky) * kw + kx; };
  strided_correlate<0>(y.data(), co, ho, wo, const_cast<double*>(input.data().data()), ci, h, w,
                       const_cast<double*>(kernels.data().data()), kh, kw, s, p, kernel_index);

  std::vector<Tensor> inputs{input, kernels};
  if (has_bias) inputs.push_back(bias);
  return make_result(
      {static_cast<std::size_t>(co), static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)}, std::move(y),
      std::move(inputs), [=](Node& out) {
        Node& px = parent(out, 0);
        Node& pk = parent(out, 1);
        if (px.requires_grad) {
          strided_correlate<1>(out.grad.data(), co, ho, wo, px.grad_buffer().data(), ci, h, w, pk.data.data(), kh, kw,
                               s, p, kernel_index);
        }
        if (pk.requires_grad) {
          strided_correlate<2>(out.grad.data(), co, ho, wo, px.data.data(), ci, h, w, pk.grad_buffer().data(), kh, kw,
                               s, p, kernel_index);
        }
        if (has_bias && parent(out, 2).requires_grad) {
          auto& g = parent(out, 2).grad_buffer();
          for (Index c = 0; c < co; ++c) {
            double acc = 0.0;
            for (Index i = 0; i < ho * wo; ++i) acc += out.grad[c * ho * wo + i];
            g[c] += acc;
          }
        }
      });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
                        std::size_t padding, std::size_t output_padding) {
  return conv_transpose2d(input, kernels, bias, stride, padding, output_padding, output_padding);
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
                        std::size_t padding, std::size_t output_padding_h, std::size_t output_padding_w) {
  require_rank(input, 3, "conv_transpose2d input");
  require_rank(kernels, 4, "conv_transpose2d kernels");
  if (stride == 0) throw DimensionError("conv_transpose2d: stride must be positive");
  if (output_padding_h >= stride || output_padding_w >= stride) {
    throw DimensionError("conv_transpose2d: output_padding must be smaller than stride " + std::to_string(stride));
  }
  const Index ci = static_cast<Index>(input.dim(0)), h = static_cast<Index>(input.dim(1)),
              w = static_cast<Index>(input.dim(2));
  const Index co = static_cast<Index>(kernels.dim(1)), kh = static_cast<Index>(kernels.dim(2)),
              kw = static_cast<Index>(kernels.dim(3));
  const Index s = static_cast<Index>(stride), p = static_cast<Index>(padding),
              oph = static_cast<Index>(output_padding_h), opw = static_cast<Index>(output_padding_w);
  if (static_cast<Index>(kernels.dim(0)) != ci) {
    throw DimensionError("conv_transpose2d: kernels " + shape_string(kernels.shape()) + " vs input " +
                         shape_string(input.shape()));
  }
  const Index ho = (h - 1) * s - 2 * p + kh + oph, wo = (w - 1) * s - 2 * p + kw + opw;
  if (ho <= 0 || wo <= 0) throw DimensionError("conv_transpose2d: empty output");
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || static_cast<Index>(bias.dim(0)) != co)) {
    throw DimensionError("conv_transpose2d: bias " + shape_string(bias.shape()));
  }

  std::vector<double> y(static_cast<std::size_t>(co * ho * wo), 0.0);
  if (has_bias)
    for (Index c = 0; c < co; ++c) std::fill_n(y.begin() + c * ho * wo, ho * wo, bias[c]);
  // Small grid = input (ci channels), big grid = output (co channels).
  auto kernel_index = [co, kh, kw](Index a, Index b, Index ky, Index kx) { return ((a * co + b) * kh + ky) * kw + kx; };
  strided_correlate<1>(const_cast<double*>(input.data().data()), ci, h, w, y.data(), co, ho, wo,
                       const_cast<double*>(kernels.data().data()), kh, kw, s, p, kernel_index);

  std::vector<Tensor> inputs{input, kernels};
  if (has_bias) inputs.push_back(bias);
  return make_result(
      {static_cast<std::size_t>(co), static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)}, std::move(y),
      std::move(inputs), [=](Node& out) {
        Node& px = parent(out, 0);
        Node& pk = parent(out, 1);
        if (px.requires_grad) {
          strided_correlate<0>(px.grad_buffer().data(), ci, h, w, out.grad.data(), co, ho, wo, pk.data.data(), kh, kw,
                               s, p, kernel_index);
        }
        if (pk.requires_grad) {
          strided_correlate<2>(px.data.data(), ci, h, w, out.grad.data(), co, ho, wo, pk.grad_buffer().data(), kh, kw,
                               s, p, kernel_index);
        }
        if (has_bias && parent(out, 2).requires_grad) {
          auto& g = parent(out, 2).grad_buffer();
          for (Index c = 0; c < co; ++c) {
            double acc = 0.0;
            for (Index i = 0; i < ho * wo; ++i) acc += out.grad[c * ho * wo + i];
            g[c] += acc;
          }
        }
      });
}

// ---- spatial resampling ------------------------------------------------------

Tensor avg_pool2d(const Tensor& input, std::size_t k) {
  require_rank(input, 3, "avg_pool2d");
  if (k == 0) throw DimensionError("avg_pool2d: k must be positive");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t ho = (h + k - 1) / k, wo = (w + k - 1) / k;
  std::vector<double> y(c * ho * wo, 0.0);
  auto count = [=](std::size_t oy, std::size_t ox) {
    return static_cast<double>((std::min(h, (oy + 1) * k) - oy * k) * (std::min(w, (ox + 1) * k) - ox * k));
  };
  auto x = input.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t iy = 0; iy < h; ++iy)
      for (std::size_t ix = 0; ix < w; ++ix) y[(ch * ho + iy / k) * wo + ix / k] += x[(ch * h + iy) * w + ix];
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) y[(ch * ho + oy) * wo + ox] /= count(oy, ox);
  return make_result({c, ho, wo}, std::move(y), {input}, [=](Node& out) {
    auto& g = parent(out, 0).grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t iy = 0; iy < h; ++iy)
        for (std::size_t ix = 0; ix < w; ++ix)
          g[(ch * h + iy) * w + ix] += out.grad[(ch * ho + iy / k) * wo + ix / k] / count(iy / k, ix / k);
  });
}

Tensor upsample_nearest(const Tensor& input, std::size_t k, std::size_t out_h, std::size_t out_w) {
  require_rank(input, 3, "upsample_nearest");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (k == 0 || out_h > h * k || out_w > w * k || out_h == 0 || out_w == 0) {
    throw DimensionError("upsample_nearest: cannot produce " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                         " from " + shape_string(input.shape()) + " at factor " + std::to_string(k));
  }
  std::vector<double> y(c * out_h * out_w);
  auto x = input.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox) y[(ch * out_h + oy) * out_w + ox] = x[(ch * h + oy / k) * w + ox / k];
  return make_result({c, out_h, out_w}, std::move(y), {input}, [=](Node& out) {
    auto& g = parent(out, 0).grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t oy = 0; oy < out_h; ++oy)
        for (std::size_t ox = 0; ox < out_w; ++ox)
          g[(ch * h + oy / k) * w + ox / k] += out.grad[(ch * out_h + oy) * out_w + ox];
  });
}

Tensor box_filter(const Tensor& input, std::size_t window) {
  require_rank(input, 3, "box_filter");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (window == 0 || window > h || window > w) {
    throw DimensionError("box_filter: window " + std::to_string(window) + " does not fit " + shape_string(input.shape()));
  }
  const std::size_t ho = h - window + 1, wo = w - window + 1;
  const double area = static_cast<double>(window * window);
  auto x = input.data();
  // Separable: horizontal window sums, then vertical.
  std::vector<double> rows(c * h * wo, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t iy = 0; iy < h; ++iy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = 0.0;
        for (std::size_t j = 0; j < window; ++j) acc += x[(ch * h + iy) * w + ox + j];
        rows[(ch * h + iy) * wo + ox] = acc;
      }
  std::vector<double> y(c * ho * wo, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = 0.0;
        for (std::size_t i = 0; i < window; ++i) acc += rows[(ch * h + oy + i) * wo + ox];
        y[(ch * ho + oy) * wo + ox] = acc / area;
      }
  return make_result({c, ho, wo}, std::move(y), {input}, [=](Node& out) {
    std::vector<double> tmp(c * h * wo, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double gv = out.grad[(ch * ho + oy) * wo + ox] / area;
          for (std::size_t i = 0; i < window; ++i) tmp[(ch * h + oy + i) * wo + ox] += gv;
        }
    auto& g = parent(out, 0).grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t iy = 0; iy < h; ++iy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double gv = tmp[(ch * h + iy) * wo + ox];
          for (std::size_t j = 0; j < window; ++j) g[(ch * h + iy) * w + ox + j] += gv;
        }
  });
}

Tensor channel_mean(const Tensor& input) {
  require_rank(input, 3, "channel_mean");
  const std::size_t c = input.dim(0), hw = input.dim(1) * input.dim(2);
  std::vector<double> y(c, 0.0);
  auto x = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc += x[ch * hw + i];
    y[ch] = acc / static_cast<double>(hw);
  }
  return make_result({c}, std::move(y), {input}, [c, hw](Node& out) {
    auto& g = parent(out, 0).grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double gv = out.grad[ch] / static_cast<double>(hw);
      for (std::size_t i = 0; i < hw; ++i) g[ch * hw + i] += gv;
    }
  });
}

// ---- fusion ----------------------------------------------------------------

Tensor stack_mean(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("stack_mean: no inputs");
  for (const auto& p : parts) require_same_shape(parts[0], p, "stack_mean");
  const double n = static_cast<double>(parts.size());
  // Summing each element's values in sorted order makes the result
  // independent of the order of `parts`, bit for bit.
  std::vector<double> y(parts[0].numel(), 0.0), column(parts.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t k = 0; k < parts.size(); ++k) column[k] = parts[k][i];
    std::sort(column.begin(), column.end());
    double acc = 0.0;
    for (double v : column) acc += v;
    y[i] = acc / n;
  }
  return make_result(parts[0].shape(), std::move(y), std::vector<Tensor>(parts.begin(), parts.end()), [n](Node& out) {
    for (auto& pp : out.parents) {
      if (!pp->requires_grad) continue;
      auto& g = pp->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] / n;
    }
  });
}

Tensor stack_max_abs(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("stack_max_abs: no inputs");
  for (const auto& p : parts) require_same_shape(parts[0], p, "stack_max_abs");
  const std::size_t n = parts[0].numel();
  std::vector<double> y(parts[0].data().begin(), parts[0].data().end());
  auto winner = std::make_shared<std::vector<std::uint32_t>>(n, 0);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    auto x = parts[k].data();
    for (std::size_t i = 0; i < n; ++i) {
      const double ax = std::fabs(x[i]), ay = std::fabs(y[i]);
      if (ax > ay || (ax == ay && x[i] > y[i])) {
        y[i] = x[i];
        (*winner)[i] = static_cast<std::uint32_t>(k);
      }
    }
  }
  return make_result(parts[0].shape(), std::move(y), std::vector<Tensor>(parts.begin(), parts.end()),
                     [winner](Node& out) {
                       for (std::size_t i = 0; i < out.grad.size(); ++i) {
                         Node& p = *out.parents[(*winner)[i]];
                         if (p.requires_grad) p.grad_buffer()[i] += out.grad[i];
                       }
                     });
}

Tensor bce_with_logits(const Tensor& logit, double target) {
  if (logit.numel() != 1) throw DimensionError("bce_with_logits: logit must be a scalar");
  const double z = logit[0];
  const double loss = std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::fabs(z)));
  return make_result({1}, {loss}, {logit}, [target](Node& out) {
    Node& p = parent(out, 0);
    const double z = p.data[0];
    const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    p.grad_buffer()[0] += out.grad[0] * (sig - target);
  });
}

}  // namespace mixcrypt::ad
