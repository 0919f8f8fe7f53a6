// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mixcrypt/autodiff/layers.hpp"
#include "mixcrypt/imaging/image.hpp"
#include "mixcrypt/instahide/instahide.hpp"

namespace mixcrypt::clustering {

using imaging::Image;

/// Two views of an image pair, each [6, 16, 16]: the stacked central crops
/// (high resolution) and the stacked 2x downsamples (low resolution).
struct PairFeatures {
  ad::Tensor hi;
  ad::Tensor lo;
};

/// Per-image halves of the pair features, so that a pair only concatenates.
struct ImageViews {
  ad::Tensor crop;   // [3, 16, 16]
  ad::Tensor small;  // [3, ceil(H/2), ceil(W/2)]
  ad::Tensor full;   // [3, H, W]
};

ImageViews image_views(const Image& image);
PairFeatures pair_features(const Image& a, const Image& b);
PairFeatures pair_features(const ImageViews& a, const ImageViews& b);

struct ComparativeConfig {
  std::size_t filters = 16;
  std::size_t blocks = 2;
  /// Off: a single branch over the stacked full-size pair (the plain
  /// scorer ablation).
  bool multi_resolution = true;
};

/// Pair scorer: each branch is a stride-2 conv stem and residual blocks,
/// globally average-pooled; the branch outputs are concatenated into one
/// dense layer whose sigmoid is the score.
class ComparativeNet {
 public:
  ComparativeNet() = default;
  ComparativeNet(const ComparativeConfig& cfg, Rng& rng);

  const ComparativeConfig& config() const { return cfg_; }

  /// Unsquashed score of the ordered pair (a, b).
  ad::Tensor logit(const ImageViews& a, const ImageViews& b) const;
  /// sigmoid(logit) in [0, 1] for the ordered pair.
  double score(const ImageViews& a, const ImageViews& b) const;
  /// Mean of both orientations.
  double symmetric_score(const ImageViews& a, const ImageViews& b) const;

  ad::NamedParameters parameters() const;

  struct Branch {
    ad::Conv2d stem;
    std::vector<ad::ResidualBlock> blocks;
    ad::Tensor operator()(const ad::Tensor& x) const;
  };
  Branch hi_branch, lo_branch;
  ad::Dense head;

 private:
  ComparativeConfig cfg_;
};

/// A pair of encryption indices and its target label in {0, 1}.
struct LabelledPair {
  std::size_t a = 0;
  std::size_t b = 0;
  double label = 0.0;
};

struct PairTrainConfig {
  std::size_t epochs = 20;
  std::size_t pairs_per_epoch = 512;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
};

struct PairTrainResult {
  std::vector<double> train_loss;    // mean BCE per epoch
  std::vector<double> heldout_loss;  // mean BCE on the held-out pairs after each epoch
  double heldout_accuracy = 0.0;
};

double pair_accuracy(const ComparativeNet& net, std::span<const ImageViews> views, std::span<const LabelledPair> pairs);
double pair_bce(const ComparativeNet& net, std::span<const ImageViews> views, std::span<const LabelledPair> pairs);

/// Adam on binary cross-entropy. `sample_pair` draws one training pair.
PairTrainResult train_pairs(ComparativeNet& net, std::span<const ImageViews> views,
                            const std::function<LabelledPair(Rng&)>& sample_pair,
                            std::span<const LabelledPair> heldout, const PairTrainConfig& cfg, Rng& rng,
                            const std::function<void(std::size_t, double, double)>& on_epoch = {});

/// Trains the comparative net on same-target labels. Targets are split: a
/// quarter (at least one) is held out and used only for the accuracy
/// report; training pairs are balanced between positives and negatives.
/// Encryption images are abs-preprocessed here.
PairTrainResult train_comparative(ComparativeNet& net, std::span<const instahide::Encryption> encryptions,
                                  const PairTrainConfig& cfg, Rng& rng,
                                  const std::function<void(std::size_t, double, double)>& on_epoch = {});

}  // namespace mixcrypt::clustering
