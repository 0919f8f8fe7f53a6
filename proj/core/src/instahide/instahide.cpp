// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/instahide/instahide.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::instahide {

namespace {

void fisher_yates(std::vector<std::size_t>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[uniform_index(rng, i)]);
}

// First `count` entries of a random permutation of [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + uniform_index(rng, n - i)]);
  pool.resize(count);
  return pool;
}

std::vector<double> make_label(const MixLabels& labels, std::span<const double> lambdas) {
  std::vector<double> y(labels.num_classes, 0.0);
  auto place = [&](const std::optional<std::size_t>& cls, double weight) {
    if (!cls) return;
    if (*cls >= labels.num_classes) throw ParameterError("class id " + std::to_string(*cls) + " out of range");
    y[*cls] += weight;
  };
  place(labels.target_class, lambdas[0]);
  place(labels.partner_class, lambdas[1]);
  return y;
}

}  // namespace

void validate(const GenerationConfig& cfg) {
  if (cfg.mix_count < 2) throw ParameterError("mix count k must be at least 2");
  if (cfg.copies < 1) throw ParameterError("copies K must be at least 1");
  if (cfg.num_private < 2) throw ParameterError("need at least 2 private images");
  if (cfg.cluster_size && *cfg.cluster_size < 2) throw ParameterError("cluster size must be at least 2");
  if (cfg.num_classes < 1) throw ParameterError("num_classes must be positive");
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw ParameterError("epsilon must lie in [0, 1]");
}

std::vector<double> lambdas_from_uniforms(std::span<const double> uniforms) {
  if (uniforms.size() < 2) throw ParameterError("mix count k must be at least 2");
  std::vector<double> e(uniforms.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!(uniforms[i] >= 0.0 && uniforms[i] < 1.0)) throw ParameterError("uniform draw outside [0, 1)");
    e[i] = -std::log1p(-uniforms[i]);
  }
  const double total = std::accumulate(e.begin(), e.end(), 0.0);
  if (total == 0.0) return std::vector<double>(e.size(), 1.0 / static_cast<double>(e.size()));
  for (auto& v : e) v /= total;
  return e;
}

std::vector<double> sample_lambdas(std::size_t k, Rng& rng) {
  if (k < 2) throw ParameterError("mix count k must be at least 2");
  std::vector<double> u(k);
  for (auto& v : u) v = uniform01(rng);
  return lambdas_from_uniforms(u);
}

std::vector<double> sign_mask(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  std::vector<double> mask(count);
  for (auto& s : mask) s = (rng() >> 63) ? -1.0 : 1.0;
  return mask;
}

Image mix_images(std::span<const Image* const> parts, std::span<const double> lambdas) {
  if (parts.empty() || parts.size() != lambdas.size()) throw DimensionError("one coefficient per image required");
  Image out(parts[0]->height, parts[0]->width);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    imaging::require_same_dims(*parts[0], *parts[p], "mix");
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (p == 0)
        out.pixels[i] = lambdas[0] * parts[0]->pixels[i];
      else
        out.pixels[i] += lambdas[p] * parts[p]->pixels[i];
    }
  }
  return out;
}

Encryption encrypt_with(const AugmentedImage& target, const AugmentedImage& partner, std::span<const Image> publics,
                        std::span<const std::int64_t> public_ids, std::span<const double> lambdas,
                        std::uint64_t sign_seed, bool sign_flip, const MixLabels& labels) {
  if (lambdas.size() < 2 || publics.size() + 2 != lambdas.size()) {
    throw DimensionError("k = " + std::to_string(lambdas.size()) + " coefficients need k - 2 = " +
                         std::to_string(publics.size()) + " public images");
  }
  if (public_ids.size() != publics.size()) throw DimensionError("one id per public image required");
  std::vector<const Image*> parts{&target.image, &partner.image};
  for (const auto& u : publics) parts.push_back(&u);

  Encryption enc;
  enc.image = mix_images(parts, lambdas);
  if (sign_flip) {
    auto mask = sign_mask(sign_seed, enc.image.size());
    for (std::size_t i = 0; i < mask.size(); ++i) enc.image.pixels[i] *= mask[i];
  }
  enc.label = make_label(labels, lambdas);

  OracleRecord oracle;
  oracle.target = {target.source_id, target.copy_index, target.params};
  oracle.partner = {partner.source_id, partner.copy_index, partner.params};
  oracle.lambdas.assign(lambdas.begin(), lambdas.end());
  oracle.sign_seed = sign_seed;
  oracle.sign_flip = sign_flip;
  oracle.public_ids.assign(public_ids.begin(), public_ids.end());
  enc.oracle = std::move(oracle);
  return enc;
}

Encryption encrypt(const AugmentedImage& target, const AugmentedImage& partner, std::span<const Image> publics,
                   std::span<const std::int64_t> public_ids, const MixLabels& labels, Rng& rng, bool sign_flip) {
  auto lambdas = sample_lambdas(publics.size() + 2, rng);
  const std::uint64_t seed = rng();
  return encrypt_with(target, partner, publics, public_ids, lambdas, seed, sign_flip, labels);
}

Image realize_copy(const imaging::AugmentRef& ref, std::span<const PrivateImage> privates) {
  if (privates.empty()) throw DataError("no private images to rebuild from");
  if (ref.source_id < 0) return Image(privates.front().image.height, privates.front().image.width, 0.0);
  const auto idx = static_cast<std::size_t>(ref.source_id);
  if (idx >= privates.size()) throw DataError("oracle refers to unknown private image " + std::to_string(idx));
  const auto& src = privates[idx].image;
  if (ref.params.kind == imaging::AugmentKind::identity) return imaging::clamp_image(src, -1.0, 1.0);
  return imaging::apply_augment(src, ref.params);
}

Image unmasked_mix(const OracleRecord& oracle, std::span<const PrivateImage> privates, std::span<const Image> publics) {
  Image target = realize_copy(oracle.target, privates);
  Image partner = realize_copy(oracle.partner, privates);
  std::vector<const Image*> parts{&target, &partner};
  for (auto id : oracle.public_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= publics.size()) throw DataError("oracle refers to unknown public image");
    parts.push_back(&publics[static_cast<std::size_t>(id)]);
  }
  return mix_images(parts, oracle.lambdas);
}

GeneratedDataset generate_dataset(std::span<const PrivateImage> privates, const GenerationConfig& cfg,
                                  std::span<const Image> publics, Rng& rng) {
  validate(cfg);
  if (privates.size() != cfg.num_private) {
    throw ParameterError("config expects " + std::to_string(cfg.num_private) + " private images, got " +
                         std::to_string(privates.size()));
  }
  const std::size_t n_public = cfg.mix_count - 2;
  if (publics.size() < n_public) {
    throw ParameterError("public pool has " + std::to_string(publics.size()) + " images, k - 2 = " +
                         std::to_string(n_public) + " needed");
  }
  for (const auto& p : privates) imaging::require_same_dims(privates[0].image, p.image, "private set");
  for (const auto& u : publics) imaging::require_same_dims(privates[0].image, u, "public pool");

  GeneratedDataset out;
  out.copies.resize(privates.size());
  for (std::size_t i = 0; i < privates.size(); ++i) {
    for (std::size_t j = 0; j < cfg.copies; ++j) {
      AugmentedImage copy;
      if (j == 0) {
        copy.image = imaging::clamp_image(privates[i].image, -1.0, 1.0);
      } else {
        copy = imaging::augment(privates[i].image, cfg.epsilon, rng);
      }
      copy.source_id = static_cast<std::int64_t>(i);
      copy.copy_index = static_cast<std::uint32_t>(j);
      out.copies[i].push_back(std::move(copy));
    }
  }

  AugmentedImage blank;
  blank.image = Image(privates[0].image.height, privates[0].image.width, 0.0);

  auto emit = [&](const AugmentedImage& target, const AugmentedImage* partner) {
    auto pick = sample_without_replacement(publics.size(), n_public, rng);
    std::vector<Image> chosen;
    std::vector<std::int64_t> ids;
    for (auto p : pick) {
      chosen.push_back(publics[p]);
      ids.push_back(static_cast<std::int64_t>(p));
    }
    MixLabels labels{cfg.num_classes, privates[static_cast<std::size_t>(target.source_id)].class_id, std::nullopt};
    if (partner->source_id >= 0) labels.partner_class = privates[static_cast<std::size_t>(partner->source_id)].class_id;
    out.encryptions.push_back(encrypt(target, *partner, chosen, ids, labels, rng, cfg.sign_flip));
  };

  if (!cfg.cluster_size) {
    // Eq. 3: flatten the copies, shuffle to get the partners, mix pairwise.
    std::vector<std::size_t> order(privates.size() * cfg.copies);
    std::iota(order.begin(), order.end(), 0);
    fisher_yates(order, rng);
    for (std::size_t f = 0; f < order.size(); ++f) {
      const auto& target = out.copies[f / cfg.copies][f % cfg.copies];
      const auto& partner = out.copies[order[f] / cfg.copies][order[f] % cfg.copies];
      emit(target, cfg.blank_partner ? &blank : &partner);
    }
  } else {
    const std::size_t others = (privates.size() - 1) * cfg.copies;
    for (std::size_t i = 0; i < privates.size(); ++i) {
      for (std::size_t l = 0; l < *cfg.cluster_size; ++l) {
        const auto& target = out.copies[i][l % cfg.copies];
        std::size_t f = uniform_index(rng, others);
        std::size_t src = f / cfg.copies;
        if (src >= i) ++src;
        emit(target, cfg.blank_partner ? &blank : &out.copies[src][f % cfg.copies]);
      }
    }
  }
  return out;
}

std::vector<Encryption> strip_oracle(std::vector<Encryption> encryptions) {
  for (auto& e : encryptions) e.oracle.reset();
  return encryptions;
}

double infer_lambda(std::span<const double> label, std::size_t target_class) {
  if (target_class >= label.size()) throw DataError("target class outside label");
  const double value = label[target_class];
  if (value <= 0.0) throw DataError("label has no mass at class " + std::to_string(target_class));
  const auto nonzero = std::count_if(label.begin(), label.end(), [](double v) { return v > 0.0; });
  if (nonzero < 2) throw AmbiguityError("single label entry cannot be split into the two coefficients");
  return value;
}

std::size_t infer_cluster_class(std::span<const Encryption> members) {
  if (members.empty()) throw DataError("empty cluster");
  const std::size_t classes = members.front().label.size();
  std::vector<std::size_t> count(classes, 0);
  std::vector<double> mass(classes, 0.0);
  for (const auto& m : members) {
    if (m.label.size() != classes) throw DimensionError("members disagree on label length");
    for (std::size_t c = 0; c < classes; ++c) {
      if (m.label[c] > 0.0) {
        ++count[c];
        mass[c] += m.label[c];
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    if (count[c] > count[best] || (count[c] == count[best] && mass[c] > mass[best])) best = c;
  }
  return best;
}

std::vector<double> cluster_lambdas(std::span<const Encryption> members, bool allow_oracle, std::size_t* used_oracle) {
  const std::size_t cls = infer_cluster_class(members);
  std::vector<double> out;
  out.reserve(members.size());
  for (const auto& m : members) {
    try {
      out.push_back(infer_lambda(m.label, cls));
      continue;
    } catch (const DataError&) {
      if (!allow_oracle || !m.oracle) throw;
    }
    out.push_back(m.oracle->lambdas.at(0));
    if (used_oracle) ++*used_oracle;
  }
  return out;
}

}  // namespace mixcrypt::instahide
