// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/restoration/fdn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mixcrypt/autodiff/adam.hpp"
#include "mixcrypt/errors.hpp"

namespace mixcrypt::restoration {

using ad::Tensor;

FusionRule parse_fusion_rule(std::string_view name) {
  if (name == "choose_max" || name == "max") return FusionRule::choose_max;
  if (name == "average" || name == "mean") return FusionRule::average;
  throw ParameterError("unknown fusion rule '" + std::string(name) + "' (expected choose_max or average)");
}

const char* to_string(FusionRule rule) { return rule == FusionRule::choose_max ? "choose_max" : "average"; }

FusionRule select_fusion_rule(std::size_t set_size, std::optional<FusionRule> override_rule) {
  if (override_rule) return *override_rule;
  return set_size <= 10 ? FusionRule::choose_max : FusionRule::average;
}

std::vector<double> beta_factors(std::span<const double> variances) {
  if (variances.empty()) return {};
  const double lo = *std::min_element(variances.begin(), variances.end());
  std::vector<double> beta(variances.size());
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (variances[i] == lo) {
      beta[i] = 1.0;
    } else {
      beta[i] = lo / variances[i];
    }
  }
  return beta;
}

Reweighted reweight(std::span<const Image> members, std::span<const double> lambdas) {
  if (members.size() != lambdas.size()) throw DimensionError("one lambda per member required");
  Reweighted out;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!(lambdas[i] > 0.0 && lambdas[i] <= 1.0)) {
      throw DataError("lambda_1 must lie in (0, 1], got " + std::to_string(lambdas[i]));
    }
    Image r = imaging::abs_image(members[i]);
    for (auto& v : r.pixels) v /= lambdas[i];
    out.variances.push_back(imaging::image_variance(r));
    out.images.push_back(std::move(r));
  }
  out.betas = beta_factors(out.variances);
  for (std::size_t i = 0; i < out.images.size(); ++i) {
    if (out.betas[i] == 1.0) continue;
    for (auto& v : out.images[i].pixels) v *= out.betas[i];
  }
  return out;
}

Tensor fuse(std::span<const Tensor> features, FusionRule rule) {
  if (features.empty()) throw DimensionError("fuse needs at least one feature map");
  if (features.size() == 1) return features[0];
  return rule == FusionRule::choose_max ? ad::stack_max_abs(features) : ad::stack_mean(features);
}

NonLocalAttention::NonLocalAttention(std::size_t channels, std::size_t key_dim, std::size_t stride, Rng& rng)
    : theta(channels, key_dim, 1, 1, 0, rng),
      phi(channels, key_dim, 1, 1, 0, rng),
      value(channels, channels, 1, 1, 0, rng),
      out(channels, channels, 1, 1, 0, rng),
      stride(stride) {}

Tensor NonLocalAttention::residual(const Tensor& x) const {
  const std::size_t c = x.dim(0), H = x.dim(1), W = x.dim(2);
  Tensor pooled = stride > 1 ? ad::avg_pool2d(x, stride) : x;
  const std::size_t h = pooled.dim(1), w = pooled.dim(2), n = h * w;
  const std::size_t d = theta.kernels.dim(0);
  Tensor q = ad::reshape(theta(pooled), {d, n});
  Tensor k = ad::reshape(phi(pooled), {d, n});
  Tensor v = ad::reshape(value(pooled), {c, n});
  Tensor logits = ad::mul_scalar(ad::matmul(ad::transpose(q), k), 1.0 / std::sqrt(static_cast<double>(d)));
  Tensor attn = ad::softmax_rows(logits);                  // [n, n], row i attends over j
  Tensor mixed = ad::matmul(v, ad::transpose(attn));       // [c, n]
  Tensor projected = out(ad::reshape(mixed, {c, h, w}));
  return stride > 1 ? ad::upsample_nearest(projected, stride, H, W) : projected;
}

Tensor NonLocalAttention::operator()(const Tensor& x) const { return ad::add(x, residual(x)); }

void NonLocalAttention::collect(const std::string& prefix, ad::NamedParameters& o) const {
  theta.collect(prefix + ".theta", o);
  phi.collect(prefix + ".phi", o);
  value.collect(prefix + ".value", o);
  out.collect(prefix + ".out", o);
}

FdnModel::FdnModel(const FdnConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.relax_channels == 0 || cfg.denoiser_filters == 0 || cfg.attention_stride == 0 ||
      cfg.attention_key_dim == 0) {
    throw ParameterError("FDN widths must be positive");
  }
  const std::size_t c = cfg.relax_channels, f = cfg.denoiser_filters;
  if (cfg.relax_kernel < 2 || cfg.relax_kernel > 5) throw ParameterError("relax kernel must lie in [2, 5]");
  relax_down = ad::Conv2d(3, c, cfg.relax_kernel, 2, 1, rng);
  relax_up = ad::ConvTranspose2d(c, c, cfg.relax_kernel, 2, 1, rng);
  relax_flat = ad::Conv2d(3, c, 3, 1, 1, rng);
  block_first = ad::Conv2d(c, c, 3, 1, 1, rng);
  block_second = ad::Conv2d(c, c, 3, 1, 1, rng);
  head = ad::Conv2d(c, f, 3, 1, 1, rng);
  for (std::size_t i = 0; i < cfg.residual_blocks; ++i) blocks.emplace_back(f, rng, false);
  attention = NonLocalAttention(f, cfg.attention_key_dim, cfg.attention_stride, rng);
  tail = ad::Conv2d(f, 3, 3, 1, 1, rng);
}

Tensor FdnModel::relax(const Tensor& image) const {
  if (!cfg_.use_relax) return relax_flat(image);
  return relax_up(relax_down(image), image.dim(1), image.dim(2));
}

Tensor FdnModel::features(const Tensor& image) const {
  return ad::relu(block_second(ad::relu(block_first(relax(image)))));
}

Tensor FdnModel::denoise(const Tensor& fused) const {
  const Tensor skip = head(fused);
  Tensor x = skip;
  const std::size_t half = blocks.size() / 2;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i == half) x = attention(x);
    x = blocks[i](x);
  }
  if (blocks.size() == half) x = attention(x);
  return tail(ad::add(skip, x));
}

std::vector<Image> FdnModel::prepare(std::span<const Image> members, std::span<const double> lambdas) const {
  if (members.empty()) throw DataError("cannot restore from an empty set");
  if (cfg_.use_reweight) return reweight(members, lambdas).images;
  std::vector<Image> out;
  for (const auto& m : members) out.push_back(imaging::abs_image(m));
  return out;
}

Tensor FdnModel::forward_prepared(std::span<const Image> prepared) const {
  if (prepared.empty()) throw DataError("cannot restore from an empty set");
  std::vector<Tensor> feats;
  feats.reserve(prepared.size());
  for (const auto& img : prepared) feats.push_back(features(imaging::to_tensor(img)));
  return denoise(fuse(feats, select_fusion_rule(prepared.size(), cfg_.fusion_override)));
}

Image FdnModel::restore(std::span<const Image> members, std::span<const double> lambdas) const {
  auto prepared = prepare(members, lambdas);
  return imaging::clamp_image(imaging::from_tensor(forward_prepared(prepared)), -1.0, 1.0);
}

ad::NamedParameters FdnModel::parameters() const {
  ad::NamedParameters p;
  relax_down.collect("relax.down", p);
  relax_up.collect("relax.up", p);
  relax_flat.collect("relax.flat", p);
  block_first.collect("block.first", p);
  block_second.collect("block.second", p);
  head.collect("denoise.head", p);
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect("denoise.res" + std::to_string(i), p);
  attention.collect("denoise.attention", p);
  tail.collect("denoise.tail", p);
  return p;
}

std::size_t reference_member(std::span<const double> variances, std::span<const std::size_t> ids) {
  if (variances.empty() || variances.size() != ids.size()) throw DimensionError("one variance per member id required");
  std::size_t best = 0;
  for (std::size_t i = 1; i < variances.size(); ++i) {
    if (variances[i] < variances[best] || (variances[i] == variances[best] && ids[i] < ids[best])) best = i;
  }
  return best;
}

std::vector<TrainingPair> make_training_pairs(std::span<const instahide::Encryption> encryptions,
                                              const std::vector<std::vector<std::size_t>>& clusters,
                                              std::span<const instahide::PrivateImage> privates,
                                              bool allow_oracle_lambda) {
  std::vector<TrainingPair> out;
  out.reserve(clusters.size());
  for (const auto& cluster : clusters) {
    if (cluster.empty()) throw DataError("empty cluster");
    std::vector<instahide::Encryption> members;
    for (auto id : cluster) {
      if (id >= encryptions.size()) throw DataError("cluster refers to unknown encryption " + std::to_string(id));
      if (!encryptions[id].oracle) throw DataError("training pairs need oracle blocks (encryption " + std::to_string(id) + ")");
      members.push_back(encryptions[id]);
    }
    TrainingPair pair;
    pair.lambdas = instahide::cluster_lambdas(members, allow_oracle_lambda);
    for (const auto& m : members) pair.members.push_back(m.image);
    auto rw = reweight(pair.members, pair.lambdas);
    pair.reference = reference_member(rw.variances, cluster);
    pair.target = instahide::realize_copy(members[pair.reference].oracle->target, privates);
    out.push_back(std::move(pair));
  }
  return out;
}

FdnTrainResult train_fdn(FdnModel& model, std::span<const TrainingPair> pairs, const FdnTrainConfig& cfg, Rng& rng,
                         const std::function<void(std::size_t, double)>& on_epoch) {
  if (pairs.empty()) throw DataError("no training pairs");
  if (cfg.batch_size == 0) throw ParameterError("batch size must be positive");
  auto params = ad::parameter_list(model.parameters());
  ad::Adam adam(params, ad::AdamConfig{.learning_rate = cfg.learning_rate});

  // Preprocessing does not depend on the parameters.
  std::vector<std::vector<Image>> prepared;
  std::vector<Tensor> targets;
  for (const auto& p : pairs) {
    prepared.push_back(model.prepare(p.members, p.lambdas));
    targets.push_back(imaging::to_tensor(p.target));
  }

  FdnTrainResult result;
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      adam.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        Tensor loss = metrics::training_loss(cfg.loss, model.forward_prepared(prepared[idx]), targets[idx],
                                             cfg.lambda_mssim);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw DataError("FDN loss became non-finite at epoch " + std::to_string(epoch + 1) +
                          "; lower the learning rate");
        }
        total += value;
        ad::mul_scalar(loss, 1.0 / static_cast<double>(end - start)).backward();
      }
      adam.step();
    }
    result.epoch_loss.push_back(total / static_cast<double>(pairs.size()));
    if (on_epoch) on_epoch(epoch, result.epoch_loss.back());
  }
  return result;
}

}  // namespace mixcrypt::restoration
