// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mixcrypt/imaging/augment.hpp"
#include "mixcrypt/imaging/image.hpp"

namespace mixcrypt::imaging {

/// Which augmented copy of which source image took part in a mix.
/// source_id -1 denotes the blank (all-zero) image.
struct AugmentRef {
  std::int64_t source_id = -1;
  std::uint32_t copy_index = 0;
  AugmentParams params;

  bool operator==(const AugmentRef&) const = default;
};

/// Ground-truth provenance of one encryption. Never part of an
/// attacker-view export.
struct OracleRecord {
  AugmentRef target;
  AugmentRef partner;
  std::vector<double> lambdas;  // k coefficients: target, partner, publics
  std::uint64_t sign_seed = 0;
  bool sign_flip = true;
  std::vector<std::int64_t> public_ids;

  bool operator==(const OracleRecord&) const = default;
};

struct DatasetRecord {
  Image image;
  std::vector<double> label;
  std::optional<OracleRecord> oracle;

  bool operator==(const DatasetRecord&) const = default;
};

// Binary dataset layout (little-endian):
//   "MXD1", u32 count, then per record
//     u32 H, u32 W, u32 num_classes,
//     3*H*W f64 pixels (channel-first), num_classes f64 label,
//     u8 oracle flag, and when set:
//       target ref, partner ref   (i64 source id, u32 copy index, params)
//       u32 k, k f64 lambdas, u64 sign seed, u8 sign flip,
//       u32 public count, i64 public ids
//   params: u8 kind, f64 rotation, dx, dy, crop x0, y0, w, h, epsilon bound
void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(std::istream& in);
void save_dataset_bin(const std::vector<DatasetRecord>& records, const std::filesystem::path& path);
std::vector<DatasetRecord> load_dataset_bin(const std::filesystem::path& path);

/// Binary P6, maxval 255, byte = round((v + 1) * 127.5) clamped to [0, 255].
void write_ppm(std::ostream& out, const Image& image);
void save_image_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(std::istream& in);
Image load_image_ppm(const std::filesystem::path& path);

}  // namespace mixcrypt::imaging
