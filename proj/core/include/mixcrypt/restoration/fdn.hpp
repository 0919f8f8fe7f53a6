// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mixcrypt/autodiff/layers.hpp"
#include "mixcrypt/imaging/image.hpp"
#include "mixcrypt/instahide/instahide.hpp"
#include "mixcrypt/metrics/metrics.hpp"

namespace mixcrypt::restoration {

using imaging::Image;

enum class FusionRule { choose_max, average };

FusionRule parse_fusion_rule(std::string_view name);
const char* to_string(FusionRule rule);

/// choose_max for sets of at most 10 members, average above.
FusionRule select_fusion_rule(std::size_t set_size, std::optional<FusionRule> override_rule = std::nullopt);

/// beta_l = min(variances) / variances[l].
std::vector<double> beta_factors(std::span<const double> variances);

struct Reweighted {
  std::vector<Image> images;
  /// Variance of each member after the 1/lambda_1 rescale, before beta.
  std::vector<double> variances;
  std::vector<double> betas;
};

/// abs(m_l) / lambda_l, then each scaled by its beta. Inputs are encryption
/// images; abs is applied here.
Reweighted reweight(std::span<const Image> members, std::span<const double> lambdas);

/// Elementwise fusion of equally shaped feature maps.
ad::Tensor fuse(std::span<const ad::Tensor> features, FusionRule rule);

/// Non-local block at reduced resolution: features are average-pooled by
/// `stride`, attend over all positions, are projected back and upsampled,
/// and are added to the input.
struct NonLocalAttention {
  ad::Conv2d theta, phi, value, out;
  std::size_t stride = 4;

  NonLocalAttention() = default;
  NonLocalAttention(std::size_t channels, std::size_t key_dim, std::size_t stride, Rng& rng);
  ad::Tensor operator()(const ad::Tensor& x) const;
  /// The term added to x.
  ad::Tensor residual(const ad::Tensor& x) const;
  void collect(const std::string& prefix, ad::NamedParameters& out) const;
};

struct FdnConfig {
  std::size_t relax_channels = 8;     // c
  std::size_t relax_kernel = 3;       // both relax convolutions, stride 2
  std::size_t denoiser_filters = 8;
  std::size_t residual_blocks = 4;
  std::size_t attention_stride = 4;
  std::size_t attention_key_dim = 4;
  bool use_reweight = true;
  bool use_relax = true;
  std::optional<FusionRule> fusion_override;
};

class FdnModel {
 public:
  FdnModel() = default;
  FdnModel(const FdnConfig& cfg, Rng& rng);

  const FdnConfig& config() const { return cfg_; }

  /// [3, H, W] -> [c, H, W]: stride-2 conv, then stride-2 transposed conv (linear)
  /// back to H x W. With relaxing disabled a stride-1 conv takes its place.
  ad::Tensor relax(const ad::Tensor& image) const;
  /// relax followed by the shared conv block.
  ad::Tensor features(const ad::Tensor& image) const;
  /// [c, H, W] -> [3, H, W], unclamped.
  ad::Tensor denoise(const ad::Tensor& fused) const;

  /// Preprocessing as configured: abs, and the re-weighting unless disabled.
  std::vector<Image> prepare(std::span<const Image> members, std::span<const double> lambdas) const;
  /// Differentiable path from prepared inputs to the unclamped output.
  ad::Tensor forward_prepared(std::span<const Image> prepared) const;
  /// Full restoration of one cluster, clamped to [-1, 1].
  Image restore(std::span<const Image> members, std::span<const double> lambdas) const;

  ad::NamedParameters parameters() const;

  // Layers are public so tests can zero or inspect branches.
  ad::Conv2d relax_down;
  ad::ConvTranspose2d relax_up;
  ad::Conv2d relax_flat;  // used when relaxing is disabled
  ad::Conv2d block_first, block_second;
  ad::Conv2d head;
  std::vector<ad::ResidualBlock> blocks;
  NonLocalAttention attention;
  ad::Conv2d tail;

 private:
  FdnConfig cfg_;
};

/// A homogeneous set and the image it should restore.
struct TrainingPair {
  std::vector<Image> members;  // encryption images
  std::vector<double> lambdas;
  Image target;
  std::size_t reference = 0;  // index of the minimum-variance member
};

/// Index of the member with the smallest rescaled variance; ties go to the
/// lowest id.
std::size_t reference_member(std::span<const double> variances, std::span<const std::size_t> ids);

/// One pair per cluster. y_M is the oracle target copy of the
/// minimum-variance member. lambdas come from cluster_lambdas.
std::vector<TrainingPair> make_training_pairs(std::span<const instahide::Encryption> encryptions,
                                              const std::vector<std::vector<std::size_t>>& clusters,
                                              std::span<const instahide::PrivateImage> privates,
                                              bool allow_oracle_lambda = true);

struct FdnTrainConfig {
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::size_t batch_size = 4;
  metrics::LossKind loss = metrics::LossKind::combined;
  double lambda_mssim = 0.7;
};

struct FdnTrainResult {
  std::vector<double> epoch_loss;
};

/// Adam on the configured loss. Throws DataError if the loss turns NaN.
FdnTrainResult train_fdn(FdnModel& model, std::span<const TrainingPair> pairs, const FdnTrainConfig& cfg, Rng& rng,
                         const std::function<void(std::size_t, double)>& on_epoch = {});

}  // namespace mixcrypt::restoration
