// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "mixcrypt/autodiff/tensor.hpp"

// Differentiable operations. Images and feature maps are channel-first
// [C, H, W] row-major; there is no batch axis and no broadcasting.
namespace mixcrypt::ad {

// Elementwise, identical shapes required.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// Ties send the gradient to `a`.
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.01);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Subgradient 0 at exactly 0.
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
/// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions to a [1] scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Population variance over all elements.
Tensor variance(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
/// Concatenates along axis 0; trailing dims must agree.
Tensor concat(std::span<const Tensor> parts);

/// output[i] = sum_j weights[i,j] * input[j] + bias[i].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& a);

/// Cross-correlation. input [Ci,H,W], kernels [Co,Ci,kh,kw], bias [Co] or
/// undefined. Output spatial size floor((H + 2p - kh)/stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              std::size_t padding);

/// Adjoint of conv2d. kernels [Ci,Co,kh,kw]; output spatial size
/// (H - 1)*stride - 2p + kh + output_padding, with output_padding < stride.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
                        std::size_t padding, std::size_t output_padding);
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
                        std::size_t padding, std::size_t output_padding_h, std::size_t output_padding_w);

/// Mean over disjoint k x k blocks; edge blocks average the pixels present,
/// so the output is ceil(H/k) x ceil(W/k).
Tensor avg_pool2d(const Tensor& input, std::size_t k);
/// Replicates each pixel into a k x k block, cropped to out_h x out_w.
Tensor upsample_nearest(const Tensor& input, std::size_t k, std::size_t out_h, std::size_t out_w);
/// Per-channel mean over every window x window patch at stride 1 ("valid").
Tensor box_filter(const Tensor& input, std::size_t window);
/// [C,H,W] -> [C], spatial mean per channel.
Tensor channel_mean(const Tensor& input);

/// Elementwise mean of equally shaped tensors; exactly invariant under
/// reordering of the parts.
Tensor stack_mean(std::span<const Tensor> parts);
/// Elementwise pick of the value with the largest magnitude, sign kept.
/// Equal magnitudes prefer the positive value, then the earliest part, so
/// the forward value does not depend on the order of the parts.
Tensor stack_max_abs(std::span<const Tensor> parts);

/// Numerically stable binary cross-entropy of sigmoid(logit) against a
/// target in [0, 1]; logit must be a [1] tensor.
Tensor bce_with_logits(const Tensor& logit, double target);

}  // namespace mixcrypt::ad
