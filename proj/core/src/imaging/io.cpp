// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/imaging/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "mixcrypt/binary_io.hpp"

namespace mixcrypt::imaging {

namespace {

constexpr std::string_view kDatasetMagic = "MXD1";
constexpr std::uint32_t kMaxSide = 1u << 14;
constexpr std::uint32_t kMaxClasses = 1u << 20;

void put_params(std::ostream& out, const AugmentParams& p) {
  binary::put_u8(out, static_cast<std::uint8_t>(p.kind));
  for (double v : {p.rotation_degrees, p.dx, p.dy, p.crop_x0, p.crop_y0, p.crop_w, p.crop_h, p.epsilon_bound}) {
    binary::put_f64(out, v);
  }
}

AugmentParams get_params(std::istream& in) {
  AugmentParams p;
  const auto kind = binary::get_u8(in, "augment kind");
  if (kind > static_cast<std::uint8_t>(AugmentKind::composite)) {
    throw FormatError("unknown augment kind " + std::to_string(kind));
  }
  p.kind = static_cast<AugmentKind>(kind);
  for (double* v : {&p.rotation_degrees, &p.dx, &p.dy, &p.crop_x0, &p.crop_y0, &p.crop_w, &p.crop_h,
                    &p.epsilon_bound}) {
    *v = binary::get_f64(in, "augment params");
  }
  return p;
}

void put_ref(std::ostream& out, const AugmentRef& r) {
  binary::put_i64(out, r.source_id);
  binary::put_u32(out, r.copy_index);
  put_params(out, r.params);
}

AugmentRef get_ref(std::istream& in) {
  AugmentRef r;
  r.source_id = binary::get_i64(in, "source id");
  r.copy_index = binary::get_u32(in, "copy index");
  r.params = get_params(in);
  return r;
}

}  // namespace

void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records) {
  out.write(kDatasetMagic.data(), kDatasetMagic.size());
  binary::put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    binary::put_u32(out, static_cast<std::uint32_t>(r.image.height));
    binary::put_u32(out, static_cast<std::uint32_t>(r.image.width));
    binary::put_u32(out, static_cast<std::uint32_t>(r.label.size()));
    for (double v : r.image.pixels) binary::put_f64(out, v);
    for (double v : r.label) binary::put_f64(out, v);
    binary::put_u8(out, r.oracle ? 1 : 0);
    if (!r.oracle) continue;
    const auto& o = *r.oracle;
    put_ref(out, o.target);
    put_ref(out, o.partner);
    binary::put_u32(out, static_cast<std::uint32_t>(o.lambdas.size()));
    for (double v : o.lambdas) binary::put_f64(out, v);
    binary::put_u64(out, o.sign_seed);
    binary::put_u8(out, o.sign_flip ? 1 : 0);
    binary::put_u32(out, static_cast<std::uint32_t>(o.public_ids.size()));
    for (auto id : o.public_ids) binary::put_i64(out, id);
  }
  if (!out) throw FormatError("failed writing dataset");
}

std::vector<DatasetRecord> read_dataset(std::istream& in) {
  binary::expect_magic(in, kDatasetMagic);
  const auto count = binary::get_u32(in, "record count");
  std::vector<DatasetRecord> records;
  records.reserve(std::min<std::uint32_t>(count, 1u << 16));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto h = binary::get_u32(in, "height");
    const auto w = binary::get_u32(in, "width");
    const auto classes = binary::get_u32(in, "class count");
    if (h == 0 || w == 0 || h > kMaxSide || w > kMaxSide) {
      throw FormatError("malformed header: image " + std::to_string(h) + "x" + std::to_string(w));
    }
    if (classes > kMaxClasses) throw FormatError("malformed header: " + std::to_string(classes) + " classes");
    DatasetRecord r;
    std::vector<double> pixels(static_cast<std::size_t>(Image::kChannels) * h * w);
    for (auto& v : pixels) v = binary::get_f64(in, "pixels");
    r.image = Image(h, w, std::move(pixels));
    r.label.resize(classes);
    for (auto& v : r.label) v = binary::get_f64(in, "label");
    const auto flag = binary::get_u8(in, "oracle flag");
    if (flag > 1) throw FormatError("malformed oracle flag");
    if (flag == 1) {
      OracleRecord o;
      o.target = get_ref(in);
      o.partner = get_ref(in);
      const auto k = binary::get_u32(in, "mix count");
      if (k > 4096) throw FormatError("implausible mix count " + std::to_string(k));
      o.lambdas.resize(k);
      for (auto& v : o.lambdas) v = binary::get_f64(in, "lambdas");
      o.sign_seed = binary::get_u64(in, "sign seed");
      o.sign_flip = binary::get_u8(in, "sign flag") != 0;
      const auto n_public = binary::get_u32(in, "public count");
      if (n_public > 4096) throw FormatError("implausible public count");
      o.public_ids.resize(n_public);
      for (auto& id : o.public_ids) id = binary::get_i64(in, "public id");
      r.oracle = std::move(o);
    }
    records.push_back(std::move(r));
  }
  return records;
}

void save_dataset_bin(const std::vector<DatasetRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_dataset(out, records);
}

std::vector<DatasetRecord> load_dataset_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset " + path.string());
  return read_dataset(in);
}

void write_ppm(std::ostream& out, const Image& image) {
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const double byte = std::round((image.at(c, y, x) + 1.0) * 127.5);
        out.put(static_cast<char>(static_cast<unsigned char>(std::clamp(byte, 0.0, 255.0))));
      }
    }
  }
  if (!out) throw FormatError("failed writing PPM");
}

void save_image_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_ppm(out, image);
}

Image read_ppm(std::istream& in) {
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  if (!(in >> magic >> w >> h >> maxval) || magic != "P6" || maxval != 255 || w == 0 || h == 0 || w > kMaxSide ||
      h > kMaxSide) {
    throw FormatError("malformed PPM header");
  }
  in.get();  // single whitespace before the raster
  Image image(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const int byte = in.get();
        if (byte == std::char_traits<char>::eof()) throw FormatError("truncated PPM raster");
        image.at(c, y, x) = static_cast<double>(byte) / 127.5 - 1.0;
      }
  return image;
}

Image load_image_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_ppm(in);
}

}  // namespace mixcrypt::imaging
