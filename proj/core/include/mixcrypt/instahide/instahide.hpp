// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mixcrypt/imaging/augment.hpp"
#include "mixcrypt/imaging/io.hpp"
#include "mixcrypt/rng.hpp"

namespace mixcrypt::instahide {

using imaging::AugmentedImage;
using imaging::DatasetRecord;
using imaging::Image;
using imaging::OracleRecord;

/// An encryption is a released image plus soft label; the oracle block is
/// present only in ground-truth exports.
using Encryption = DatasetRecord;

struct GenerationConfig {
  std::size_t num_private = 2;  // N
  std::size_t copies = 1;       // K augmented copies per private image
  std::size_t mix_count = 6;    // k
  double epsilon = 0.0;
  std::size_t num_classes = 10;
  /// When set, emit exactly this many encryptions per private image, each
  /// with that image as target, instead of the N*K shuffled pairing.
  std::optional<std::size_t> cluster_size;
  /// Mix with an all-zero partner instead of another private image.
  bool blank_partner = false;
  bool sign_flip = true;
};

void validate(const GenerationConfig& cfg);

struct PrivateImage {
  Image image;
  std::size_t class_id = 0;
};

/// Flat Dirichlet draw: normalised exponentials. k >= 2.
std::vector<double> sample_lambdas(std::size_t k, Rng& rng);
/// The same map applied to given uniforms u_i in [0, 1): lambda_i is
/// proportional to -log(1 - u_i). An all-zero input gives the uniform vector.
std::vector<double> lambdas_from_uniforms(std::span<const double> uniforms);

/// Per-pixel +-1 mask derived from a 64-bit seed.
std::vector<double> sign_mask(std::uint64_t seed, std::size_t count);

/// sum_i lambdas[i] * parts[i], accumulated in order.
Image mix_images(std::span<const Image* const> parts, std::span<const double> lambdas);

struct MixLabels {
  std::size_t num_classes = 0;
  std::optional<std::size_t> target_class;
  std::optional<std::size_t> partner_class;  // empty for a blank partner
};

/// Eq. 1 with given coefficients and mask seed. publics.size() must equal
/// lambdas.size() - 2.
Encryption encrypt_with(const AugmentedImage& target, const AugmentedImage& partner, std::span<const Image> publics,
                        std::span<const std::int64_t> public_ids, std::span<const double> lambdas,
                        std::uint64_t sign_seed, bool sign_flip, const MixLabels& labels);

/// Eq. 1 with freshly drawn coefficients and a fresh mask.
Encryption encrypt(const AugmentedImage& target, const AugmentedImage& partner, std::span<const Image> publics,
                   std::span<const std::int64_t> public_ids, const MixLabels& labels, Rng& rng,
                   bool sign_flip = true);

/// Rebuilds the augmented copy an oracle reference points to. The blank
/// partner (source -1) is an all-zero image of the private images' size.
Image realize_copy(const imaging::AugmentRef& ref, std::span<const PrivateImage> privates);

/// The unmasked mix lambda_1 x + lambda_2 s + sum lambda_i u_i rebuilt from an
/// oracle block and the source images. Augmented copies are recomputed.
Image unmasked_mix(const OracleRecord& oracle, std::span<const PrivateImage> privates, std::span<const Image> publics);

struct GeneratedDataset {
  std::vector<Encryption> encryptions;
  /// All augmented copies, indexed [source][copy].
  std::vector<std::vector<AugmentedImage>> copies;
};

GeneratedDataset generate_dataset(std::span<const PrivateImage> privates, const GenerationConfig& cfg,
                                  std::span<const Image> publics, Rng& rng);

/// Attacker view: the same records without oracle blocks.
std::vector<Encryption> strip_oracle(std::vector<Encryption> encryptions);

/// label[target_class]. A zero entry is a DataError; a label with a single
/// nonzero entry cannot be split into lambda_1 and lambda_2 and raises
/// AmbiguityError.
double infer_lambda(std::span<const double> label, std::size_t target_class);

/// The class shared by most members of a cluster; ties go to the class with
/// the larger summed coefficient, then the lower index.
std::size_t infer_cluster_class(std::span<const Encryption> members);

/// Per-member lambda_1 for a cluster: label inference where unambiguous,
/// otherwise the oracle coefficient. Throws DataError when neither works.
/// `used_oracle`, if given, counts the fallbacks.
std::vector<double> cluster_lambdas(std::span<const Encryption> members, bool allow_oracle,
                                    std::size_t* used_oracle = nullptr);

}  // namespace mixcrypt::instahide
