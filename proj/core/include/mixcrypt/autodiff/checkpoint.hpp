// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>

#include "mixcrypt/autodiff/layers.hpp"

namespace mixcrypt::ad {

// Parameter checkpoint layout (all integers and reals little-endian):
//   "MXW1"
//   repeated until end of file:
//     u32 name_length, name bytes,
//     u32 rank, rank x u64 dims,
//     product(dims) x f64 values

void write_checkpoint(std::ostream& out, const NamedParameters& params);
void save_checkpoint(const std::filesystem::path& path, const NamedParameters& params);

/// Reads a checkpoint into freshly allocated tensors, in file order.
NamedParameters read_checkpoint(std::istream& in);
NamedParameters load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into existing parameters; every name must be
/// present with an identical shape.
void restore_parameters(const NamedParameters& from_file, const NamedParameters& into);

}  // namespace mixcrypt::ad
