// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/autodiff/checkpoint.hpp"

#include <fstream>
#include <map>

#include "mixcrypt/binary_io.hpp"

namespace mixcrypt::ad {

namespace {
constexpr std::string_view kMagic = "MXW1";
constexpr std::uint32_t kMaxRank = 8;
}  // namespace

void write_checkpoint(std::ostream& out, const NamedParameters& params) {
  out.write(kMagic.data(), kMagic.size());
  for (const auto& [name, tensor] : params) {
    binary::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    binary::put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) binary::put_u64(out, d);
    for (double v : tensor.data()) binary::put_f64(out, v);
  }
  if (!out) throw FormatError("failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const NamedParameters& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

NamedParameters read_checkpoint(std::istream& in) {
  binary::expect_magic(in, kMagic);
  NamedParameters params;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto name_length = binary::get_u32(in, "parameter name length");
    std::string name(name_length, '\0');
    if (!in.read(name.data(), name_length)) throw FormatError("truncated payload while reading parameter name");
    const auto rank = binary::get_u32(in, "rank");
    if (rank == 0 || rank > kMaxRank) throw FormatError("implausible rank " + std::to_string(rank) + " for " + name);
    Shape shape(rank);
    for (auto& d : shape) {
      d = binary::get_u64(in, "dimension");
      if (d == 0) throw FormatError("zero dimension in " + name);
    }
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = binary::get_f64(in, "values of " + name);
    params.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values), true));
  }
  return params;
}

NamedParameters load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

void restore_parameters(const NamedParameters& from_file, const NamedParameters& into) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : from_file) by_name[name] = &t;
  for (const auto& [name, target] : into) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks parameter " + name);
    if (it->second->shape() != target.shape()) {
      throw FormatError("checkpoint parameter " + name + " has shape " + shape_string(it->second->shape()) +
                        ", model expects " + shape_string(target.shape()));
    }
    auto src = it->second->data();
    Tensor handle = target;
    auto dst = handle.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace mixcrypt::ad
