// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/clustering/comparative.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "mixcrypt/autodiff/adam.hpp"
#include "mixcrypt/errors.hpp"

namespace mixcrypt::clustering {

using ad::Tensor;

ImageViews image_views(const Image& image) {
  return {imaging::to_tensor(imaging::central_crop16(image)), imaging::to_tensor(imaging::downsample2(image)),
          imaging::to_tensor(image)};
}

PairFeatures pair_features(const ImageViews& a, const ImageViews& b) {
  if (a.full.shape() != b.full.shape()) throw DimensionError("pair images differ in size");
  std::vector<Tensor> hi{a.crop, b.crop}, lo{a.small, b.small};
  return {ad::concat(hi), ad::concat(lo)};
}

PairFeatures pair_features(const Image& a, const Image& b) {
  imaging::require_same_dims(a, b, "pair_features");
  return pair_features(image_views(a), image_views(b));
}

Tensor ComparativeNet::Branch::operator()(const Tensor& x) const {
  Tensor h = ad::relu(stem(x));
  for (const auto& block : blocks) h = block(h);
  return ad::channel_mean(h);
}

ComparativeNet::ComparativeNet(const ComparativeConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.filters == 0) throw ParameterError("comparative net needs at least one filter");
  auto make_branch = [&] {
    Branch b;
    b.stem = ad::Conv2d(6, cfg.filters, 3, 2, 1, rng);
    for (std::size_t i = 0; i < cfg.blocks; ++i) b.blocks.emplace_back(cfg.filters, rng);
    return b;
  };
  hi_branch = make_branch();
  if (cfg.multi_resolution) lo_branch = make_branch();
  head = ad::Dense(cfg.multi_resolution ? 2 * cfg.filters : cfg.filters, 1, rng);
}

Tensor ComparativeNet::logit(const ImageViews& a, const ImageViews& b) const {
  if (!cfg_.multi_resolution) {
    std::vector<Tensor> full{a.full, b.full};
    return head(hi_branch(ad::concat(full)));
  }
  auto f = pair_features(a, b);
  std::vector<Tensor> both{hi_branch(f.hi), lo_branch(f.lo)};
  return head(ad::concat(both));
}

double ComparativeNet::score(const ImageViews& a, const ImageViews& b) const {
  ad::NoGradGuard no_grad;
  const double z = logit(a, b).item();
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double ComparativeNet::symmetric_score(const ImageViews& a, const ImageViews& b) const {
  return 0.5 * (score(a, b) + score(b, a));
}

ad::NamedParameters ComparativeNet::parameters() const {
  ad::NamedParameters p;
  auto collect = [&](const Branch& b, const std::string& name) {
    b.stem.collect(name + ".stem", p);
    for (std::size_t i = 0; i < b.blocks.size(); ++i) b.blocks[i].collect(name + ".res" + std::to_string(i), p);
  };
  collect(hi_branch, "hi");
  if (cfg_.multi_resolution) collect(lo_branch, "lo");
  head.collect("head", p);
  return p;
}

double pair_accuracy(const ComparativeNet& net, std::span<const ImageViews> views, std::span<const LabelledPair> pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const bool predicted = net.symmetric_score(views[p.a], views[p.b]) >= 0.5;
    if (predicted == (p.label >= 0.5)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double pair_bce(const ComparativeNet& net, std::span<const ImageViews> views, std::span<const LabelledPair> pairs) {
  if (pairs.empty()) return 0.0;
  ad::NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& p : pairs) total += ad::bce_with_logits(net.logit(views[p.a], views[p.b]), p.label).item();
  return total / static_cast<double>(pairs.size());
}

PairTrainResult train_pairs(ComparativeNet& net, std::span<const ImageViews> views,
                            const std::function<LabelledPair(Rng&)>& sample_pair,
                            std::span<const LabelledPair> heldout, const PairTrainConfig& cfg, Rng& rng,
                            const std::function<void(std::size_t, double, double)>& on_epoch) {
  if (cfg.batch_size == 0) throw ParameterError("batch size must be positive");
  ad::Adam adam(ad::parameter_list(net.parameters()), ad::AdamConfig{.learning_rate = cfg.learning_rate});
  PairTrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t start = 0; start < cfg.pairs_per_epoch; start += cfg.batch_size) {
      const std::size_t end = std::min(cfg.pairs_per_epoch, start + cfg.batch_size);
      adam.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        auto p = sample_pair(rng);
        // Random orientation so the net does not learn an order bias.
        if (uniform01(rng) < 0.5) std::swap(p.a, p.b);
        Tensor loss = ad::bce_with_logits(net.logit(views[p.a], views[p.b]), p.label);
        total += loss.item();
        ad::mul_scalar(loss, 1.0 / static_cast<double>(end - start)).backward();
      }
      adam.step();
    }
    const double train = cfg.pairs_per_epoch ? total / static_cast<double>(cfg.pairs_per_epoch) : 0.0;
    if (!std::isfinite(train)) throw DataError("pair loss became non-finite; lower the learning rate");
    result.train_loss.push_back(train);
    result.heldout_loss.push_back(pair_bce(net, views, heldout));
    if (on_epoch) on_epoch(epoch, train, result.heldout_loss.back());
  }
  result.heldout_accuracy = pair_accuracy(net, views, heldout);
  return result;
}

namespace {

// Balanced pair: a random anchor, then a same-group or other-group partner.
LabelledPair balanced_pair(const std::vector<std::vector<std::size_t>>& groups, Rng& rng) {
  for (;;) {
    const auto& g = groups[uniform_index(rng, groups.size())];
    if (g.size() < 2) continue;
    const std::size_t a = g[uniform_index(rng, g.size())];
    if (uniform01(rng) < 0.5) {
      std::size_t b = a;
      while (b == a) b = g[uniform_index(rng, g.size())];
      return {a, b, 1.0};
    }
    const auto* other = &g;
    while (other == &g) other = &groups[uniform_index(rng, groups.size())];
    return {a, (*other)[uniform_index(rng, other->size())], 0.0};
  }
}

}  // namespace

PairTrainResult train_comparative(ComparativeNet& net, std::span<const instahide::Encryption> encryptions,
                                  const PairTrainConfig& cfg, Rng& rng,
                                  const std::function<void(std::size_t, double, double)>& on_epoch) {
  std::map<std::int64_t, std::vector<std::size_t>> by_target;
  std::vector<ImageViews> views;
  views.reserve(encryptions.size());
  for (std::size_t i = 0; i < encryptions.size(); ++i) {
    if (!encryptions[i].oracle) throw DataError("comparative training needs oracle blocks");
    by_target[encryptions[i].oracle->target.source_id].push_back(i);
    views.push_back(image_views(imaging::abs_image(encryptions[i].image)));
  }
  std::vector<std::vector<std::size_t>> groups;
  // Singleton targets offer no positive pair and are left out.
  for (auto& [id, members] : by_target) {
    if (members.size() >= 2) groups.push_back(std::move(members));
  }
  if (groups.size() < 4) {
    throw DataError("comparative training needs at least 4 targets with two or more encryptions each");
  }

  // Hold out every fourth target group.
  std::vector<std::vector<std::size_t>> train_groups, held_groups;
  for (std::size_t g = 0; g < groups.size(); ++g) (g % 4 == 3 ? held_groups : train_groups).push_back(groups[g]);
  if (held_groups.size() < 2) {
    held_groups.push_back(train_groups.back());
    train_groups.pop_back();
  }

  Rng held_rng(stage_seed(rng(), "heldout-pairs"));
  std::vector<LabelledPair> heldout;
  for (std::size_t i = 0; i < 256; ++i) heldout.push_back(balanced_pair(held_groups, held_rng));

  return train_pairs(net, views, [&](Rng& r) { return balanced_pair(train_groups, r); }, heldout, cfg, rng,
                     on_epoch);
}

}  // namespace mixcrypt::clustering
