// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "mixcrypt/errors.hpp"

// Little-endian primitive encoding shared by the on-disk formats.
namespace mixcrypt::binary {

template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), sizeof(T));
}

inline void put_u8(std::ostream& out, std::uint8_t v) { put(out, v); }
inline void put_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put(out, v); }
inline void put_i64(std::ostream& out, std::int64_t v) { put(out, v); }
inline void put_f64(std::ostream& out, double v) { put(out, v); }

template <class T>
T get(std::istream& in, std::string_view what) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), sizeof(T))) throw FormatError("truncated payload while reading " + std::string(what));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline std::uint8_t get_u8(std::istream& in, std::string_view what) { return get<std::uint8_t>(in, what); }
inline std::uint32_t get_u32(std::istream& in, std::string_view what) { return get<std::uint32_t>(in, what); }
inline std::uint64_t get_u64(std::istream& in, std::string_view what) { return get<std::uint64_t>(in, what); }
inline std::int64_t get_i64(std::istream& in, std::string_view what) { return get<std::int64_t>(in, what); }
inline double get_f64(std::istream& in, std::string_view what) { return get<double>(in, what); }

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(magic.size())) || got != magic) {
    throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
  }
}

}  // namespace mixcrypt::binary
