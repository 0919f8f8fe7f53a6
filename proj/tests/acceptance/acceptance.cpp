// SPDX-License-Identifier: Apache-2.0
// Acceptance gate. Runs every criterion (or those named on the command line)
// and prints one PASS/FAIL line each. Exit status is nonzero if any fails.
//
//   acceptance            all criteria
//   acceptance 1 3 8      a subset
//   acceptance --work DIR artifact directory for the pipeline runs

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "mixcrypt/autodiff/ops.hpp"
#include "mixcrypt/baselines/baselines.hpp"
#include "mixcrypt/clustering/comparative.hpp"
#include "mixcrypt/clustering/filter.hpp"
#include "mixcrypt/clustering/graph.hpp"
#include "mixcrypt/harness/config.hpp"
#include "mixcrypt/harness/pipeline.hpp"
#include "mixcrypt/imaging/augment.hpp"
#include "mixcrypt/imaging/synthetic.hpp"
#include "mixcrypt/instahide/instahide.hpp"
#include "mixcrypt/metrics/metrics.hpp"
#include "mixcrypt/restoration/fdn.hpp"

namespace fs = std::filesystem;
using namespace mixcrypt;
using ad::Tensor;
using imaging::Image;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

Image random_image(std::size_t h, std::size_t w, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Image img(h, w);
  for (auto& v : img.pixels) v = uniform(rng, lo, hi);
  return img;
}

std::vector<instahide::PrivateImage> make_privates(std::size_t n, std::size_t side, Rng& rng) {
  std::vector<instahide::PrivateImage> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({imaging::synthesize_image(side, side, imaging::SyntheticStyle::shapes, rng, i % 10), i % 10});
  }
  return out;
}

// ---------------------------------------------------------------- 1

Outcome gradient_suite() {
  using mixcrypt::testing::gradcheck;
  using mixcrypt::testing::random_tensor;
  using Binary = std::function<Tensor(const Tensor&, const Tensor&)>;
  const std::vector<std::pair<const char*, Binary>> ops = {
      {"add", [](auto& a, auto& b) { return ad::add(a, b); }},
      {"sub", [](auto& a, auto& b) { return ad::sub(a, b); }},
      {"mul", [](auto& a, auto& b) { return ad::mul(a, b); }},
      {"div", [](auto& a, auto& b) { return ad::div(a, ad::add_scalar(ad::abs(b), 0.5)); }},
      {"maximum", [](auto& a, auto& b) { return ad::maximum(a, b); }},
      {"add_scalar", [](auto& a, auto&) { return ad::add_scalar(a, 0.3); }},
      {"mul_scalar", [](auto& a, auto&) { return ad::mul_scalar(a, -1.7); }},
      {"neg", [](auto& a, auto&) { return ad::neg(a); }},
      {"relu", [](auto& a, auto&) { return ad::relu(a); }},
      {"leaky_relu", [](auto& a, auto&) { return ad::leaky_relu(a, 0.1); }},
      {"sigmoid", [](auto& a, auto&) { return ad::sigmoid(a); }},
      {"tanh", [](auto& a, auto&) { return ad::tanh(a); }},
      {"abs", [](auto& a, auto&) { return ad::abs(a); }},
      {"square", [](auto& a, auto&) { return ad::square(a); }},
      {"clamp", [](auto& a, auto&) { return ad::clamp(a, -0.5, 0.5); }},
      {"sum", [](auto& a, auto&) { return ad::sum(a); }},
      {"mean", [](auto& a, auto&) { return ad::mean(a); }},
      {"variance", [](auto& a, auto&) { return ad::variance(a); }},
      {"concat", [](auto& a, auto& b) { std::vector<Tensor> p{a, b}; return ad::concat(p); }},
      {"reshape", [](auto& a, auto&) { return ad::reshape(a, {a.numel()}); }},
      {"avg_pool2d", [](auto& a, auto&) { return ad::avg_pool2d(a, 2); }},
      {"upsample", [](auto& a, auto&) { return ad::upsample_nearest(a, 2, 7, 9); }},
      {"box_filter", [](auto& a, auto&) { return ad::box_filter(a, 3); }},
      {"channel_mean", [](auto& a, auto&) { return ad::channel_mean(a); }},
      {"stack_mean", [](auto& a, auto& b) { std::vector<Tensor> p{a, b, a}; return ad::stack_mean(p); }},
      {"stack_max_abs", [](auto& a, auto& b) { std::vector<Tensor> p{a, b}; return ad::stack_max_abs(p); }},
      {"matmul", [](auto& a, auto& b) { return ad::matmul(ad::reshape(a, {6, 10}), ad::transpose(ad::reshape(b, {6, 10}))); }},
      {"softmax", [](auto& a, auto&) { return ad::softmax_rows(ad::reshape(a, {6, 10})); }},
  };
  Rng rng(101);
  double worst_op = 0.0, worst_net = 0.0;
  std::string worst_op_name, worst_net_name;
  auto note = [](double e, double& worst, std::string& name, const std::string& what) {
    if (e >= worst) worst = e, name = what;
  };
  for (const auto& [name, fn] : ops) {
    auto a = random_tensor({3, 4, 5}, rng, -1, 1, 1e-2);
    auto b = random_tensor({3, 4, 5}, rng, -1, 1, 1e-2);
    for (std::size_t i = 0; i < a.numel(); ++i) {
      if (std::fabs(std::fabs(a.data()[i]) - std::fabs(b.data()[i])) < 1e-2) b.data()[i] += 0.05;
      if (std::fabs(std::fabs(a.data()[i]) - 0.5) < 1e-2) a.data()[i] += 0.03;
    }
    auto loss = [&] {
      auto y = fn(a, b);
      std::vector<double> w(y.numel());
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.1 * static_cast<double>(i % 7);
      return ad::sum(ad::mul(ad::square(y), Tensor::from(y.shape(), std::move(w))));
    };
    note(gradcheck(loss, {a, b}).worst_relative_error, worst_op, worst_op_name, name);
  }
  {
    auto x = random_tensor({2, 9, 9}, rng);
    auto k = random_tensor({3, 2, 3, 3}, rng), kb = random_tensor({3}, rng);
    note(gradcheck([&] { return ad::sum(ad::square(ad::conv2d(x, k, kb, 2, 1))); }, {x, k, kb}).worst_relative_error,
         worst_op, worst_op_name, "conv2d");
    auto kt = random_tensor({2, 3, 3, 3}, rng), ktb = random_tensor({3}, rng);
    note(gradcheck([&] { return ad::sum(ad::square(ad::conv_transpose2d(x, kt, ktb, 2, 1, 1))); }, {x, kt, ktb})
             .worst_relative_error,
         worst_op, worst_op_name, "conv_transpose2d");
    auto v = random_tensor({7}, rng), w = random_tensor({4, 7}, rng), wb = random_tensor({4}, rng);
    note(gradcheck([&] { return ad::sum(ad::square(ad::dense(v, w, wb))); }, {v, w, wb}).worst_relative_error, worst_op,
         worst_op_name, "dense");
    auto z = random_tensor({1}, rng);
    note(gradcheck([&] { return ad::bce_with_logits(z, 1.0); }, {z}).worst_relative_error, worst_op, worst_op_name,
         "bce_with_logits");
    auto p = random_tensor({3, 16, 16}, rng), q = random_tensor({3, 16, 16}, rng);
    note(gradcheck([&] { return metrics::mssim(p, q); }, {p, q}).worst_relative_error, worst_op, worst_op_name, "mssim");
    note(gradcheck([&] { return metrics::l1_loss(p, q); }, {p, q}).worst_relative_error, worst_op, worst_op_name, "l1");
    note(gradcheck([&] { return metrics::l2_loss(p, q); }, {p, q}).worst_relative_error, worst_op, worst_op_name, "l2");
    note(gradcheck([&] { return metrics::combined_loss(p, q); }, {p, q}).worst_relative_error, worst_op, worst_op_name,
         "combined_loss");
  }

  // Networks: one relative error over all parameters. The smaller step keeps
  // central differences from straddling relu and choose-max switches.
  constexpr double kNetStep = 1e-6;
  for (auto rule : {restoration::FusionRule::choose_max, restoration::FusionRule::average}) {
    restoration::FdnConfig cfg{.relax_channels = 2, .denoiser_filters = 3, .residual_blocks = 2,
                               .attention_stride = 4, .attention_key_dim = 2};
    cfg.fusion_override = rule;
    restoration::FdnModel model(cfg, rng);
    std::vector<Image> prepared{random_image(16, 16, rng, 0, 1), random_image(16, 16, rng, 0, 1),
                                random_image(16, 16, rng, 0, 1)};
    auto target = imaging::to_tensor(random_image(16, 16, rng));
    auto loss = [&] { return metrics::combined_loss(model.forward_prepared(prepared), target); };
    note(gradcheck(loss, ad::parameter_list(model.parameters()), kNetStep).joint_relative_error, worst_net, worst_net_name,
         std::string("fdn/") + to_string(rule));
  }
  for (bool multi : {true, false}) {
    clustering::ComparativeNet net({.filters = 4, .blocks = 1, .multi_resolution = multi}, rng);
    auto a = clustering::image_views(random_image(16, 16, rng));
    auto b = clustering::image_views(random_image(16, 16, rng));
    auto loss = [&] { return ad::bce_with_logits(net.logit(a, b), 1.0); };
    note(gradcheck(loss, ad::parameter_list(net.parameters()), kNetStep).joint_relative_error, worst_net, worst_net_name,
         multi ? "comparative" : "comparative/plain");
  }
  {
    clustering::FilterModel filter{clustering::ComparativeNet({.filters = 4, .blocks = 1}, rng)};
    auto a = clustering::image_views(random_image(16, 16, rng));
    auto b = clustering::image_views(random_image(16, 16, rng));
    auto loss = [&] { return ad::bce_with_logits(filter.net.logit(a, b), 0.0); };
    note(gradcheck(loss, ad::parameter_list(filter.net.parameters()), kNetStep).joint_relative_error, worst_net,
         worst_net_name,
         "filter");
  }
  return {worst_op < 1e-4 && worst_net < 1e-3,
          "worst op " + worst_op_name + fmt(" %.2e, worst network ", worst_op) + worst_net_name +
              fmt(" %.2e", worst_net)};
}

// ---------------------------------------------------------------- 2

// Eq. 1 recomputed from the oracle block: weighted sum in record order, then
// the sign mask drawn from the recorded seed.
Image reconstruct(const instahide::OracleRecord& o, const instahide::GeneratedDataset& ds,
                  const std::vector<Image>& publics) {
  auto copy_of = [&](const imaging::AugmentRef& ref) {
    const auto& shape = ds.copies[0][0].image;
    if (ref.source_id < 0) return Image(shape.height, shape.width, 0.0);
    return ds.copies[static_cast<std::size_t>(ref.source_id)][ref.copy_index].image;
  };
  const Image x = copy_of(o.target), s = copy_of(o.partner);
  Image m(x.height, x.width);
  Rng mask(o.sign_seed);
  for (std::size_t i = 0; i < m.size(); ++i) {
    double acc = o.lambdas[0] * x.pixels[i];
    acc += o.lambdas[1] * s.pixels[i];
    for (std::size_t p = 0; p < o.public_ids.size(); ++p) {
      acc += o.lambdas[p + 2] * publics[static_cast<std::size_t>(o.public_ids[p])].pixels[i];
    }
    const bool flip = o.sign_flip && (mask() >> 63) != 0;
    m.pixels[i] = flip ? -acc : acc;
  }
  return m;
}

Outcome encryption_exactness() {
  Rng rng(202);
  std::size_t checked = 0, exact = 0, abs_ok = 0;
  while (checked < 1000) {
    const std::size_t n = 2 + uniform_index(rng, 5), k = 2 + uniform_index(rng, 6);
    auto privates = make_privates(n, 16, rng);
    auto publics = imaging::synthesize_images(8, 16, 16, imaging::SyntheticStyle::texture, rng);
    instahide::GenerationConfig cfg{.num_private = n, .copies = 1 + uniform_index(rng, 6), .mix_count = k,
                                    .epsilon = uniform(rng, 0.0, 0.5)};
    if (uniform_index(rng, 2) == 0) cfg.cluster_size = 2 + uniform_index(rng, 8);
    auto ds = instahide::generate_dataset(privates, cfg, publics, rng);
    for (const auto& e : ds.encryptions) {
      if (checked == 1000) break;
      ++checked;
      if (e.image == reconstruct(*e.oracle, ds, publics)) ++exact;
      const auto v = instahide::unmasked_mix(*e.oracle, privates, publics);
      bool same = true;
      for (std::size_t i = 0; i < v.size(); ++i) same = same && std::fabs(e.image.pixels[i]) == std::fabs(v.pixels[i]);
      if (same) ++abs_ok;
    }
  }
  return {exact == checked && abs_ok == checked,
          fmt("%.0f/%.0f bit-exact, %.0f/%.0f abs-invariant", exact, checked, abs_ok, checked)};
}

// ---------------------------------------------------------------- 3

double naive_mssim(const Image& a, const Image& b, std::size_t k) {
  const double c1 = 0.02 * 0.02, c2 = 0.06 * 0.06;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y0 = 0; y0 + k <= a.height; ++y0)
      for (std::size_t x0 = 0; x0 + k <= a.width; ++x0) {
        double ma = 0, mb = 0;
        for (std::size_t y = y0; y < y0 + k; ++y)
          for (std::size_t x = x0; x < x0 + k; ++x) ma += a.at(c, y, x), mb += b.at(c, y, x);
        ma /= k * k;
        mb /= k * k;
        double va = 0, vb = 0, cov = 0;
        for (std::size_t y = y0; y < y0 + k; ++y)
          for (std::size_t x = x0; x < x0 + k; ++x) {
            const double da = a.at(c, y, x) - ma, db = b.at(c, y, x) - mb;
            va += da * da, vb += db * db, cov += da * db;
          }
        va /= k * k, vb /= k * k, cov /= k * k;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / count;
}

Outcome metric_oracle() {
  Rng rng(303);
  double worst = 0.0;
  bool identity = true;
  for (int t = 0; t < 200; ++t) {
    auto a = random_image(16, 16, rng), b = random_image(16, 16, rng);
    worst = std::max(worst, std::fabs(metrics::mssim(a, b) - naive_mssim(a, b, 8)));
    identity = identity && metrics::mssim(a, a) == 1.0;
  }
  return {worst <= 1e-9 && identity,
          fmt("max |fast - naive| %.2e; mssim(x,x) == 1 ", worst) + (identity ? "always" : "violated")};
}

// ---------------------------------------------------------------- 4

Outcome reweighting() {
  const std::vector<double> var{0.1, 0.2, 0.4};
  const bool exact = restoration::beta_factors(var) == std::vector<double>{1.0, 0.5, 0.25};
  // x ~ U[-1, 1] and delta ~ U[-1, 1] independent, both of variance 1/3.
  Rng rng(404);
  Image x(200, 167), delta(200, 167);
  for (auto& v : x.pixels) v = uniform(rng, -1.0, 1.0);
  for (auto& v : delta.pixels) v = uniform(rng, -1.0, 1.0);
  double worst_z = 0.0;
  for (double lambda : {0.2, 0.4, 0.7}) {
    Image y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y.pixels[i] += delta.pixels[i] / lambda;
    const double expected = 1.0 / 3.0 + (1.0 / 3.0) / (lambda * lambda);
    const double n = static_cast<double>(y.size());
    const double mu = std::accumulate(y.pixels.begin(), y.pixels.end(), 0.0) / n;
    double m4 = 0.0;
    for (double v : y.pixels) m4 += std::pow(v - mu, 4);
    m4 /= n;
    const double sample = imaging::image_variance(y);
    const double se = std::sqrt((m4 - sample * sample) / n);
    worst_z = std::max(worst_z, std::fabs(sample - expected) / se);
  }
  return {exact && worst_z < 3.0,
          std::string(exact ? "beta exact" : "beta WRONG") + fmt(", worst deviation %.2f standard errors over %.0f samples",
                                                                 worst_z, static_cast<double>(x.size()))};
}

// ---------------------------------------------------------------- 5

Outcome clustering_oracle() {
  Rng rng(505);
  int recovered = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 7), m = 2 + uniform_index(rng, 7);
    auto privates = make_privates(n, 8, rng);
    auto publics = imaging::synthesize_images(6, 8, 8, imaging::SyntheticStyle::shapes, rng);
    instahide::GenerationConfig cfg{.num_private = n, .copies = m, .mix_count = 4, .epsilon = 0.2, .cluster_size = m};
    auto ds = instahide::generate_dataset(privates, cfg, publics, rng);
    auto graph = clustering::build_similarity_graph(ds.encryptions.size(), clustering::oracle_scorer(ds.encryptions));
    auto cliques = clustering::extract_cliques(graph, n, m);
    auto clusters = clustering::primary_clusters(clustering::assign_encryptions(graph, cliques), cliques);
    std::map<std::int64_t, std::vector<std::size_t>> truth;
    for (std::size_t i = 0; i < ds.encryptions.size(); ++i) truth[ds.encryptions[i].oracle->target.source_id].push_back(i);
    std::set<std::vector<std::size_t>> want, got;
    for (auto& [id, members] : truth) want.insert(members);
    for (auto c : clusters) {
      std::sort(c.members.begin(), c.members.end());
      if (!c.members.empty()) got.insert(c.members);
    }
    if (got == want) ++recovered;
  }
  return {recovered == 50, fmt("%.0f/50 trials recovered the exact partition", recovered)};
}

// ---------------------------------------------------------------- 6

Outcome filtering_guarantee() {
  Rng rng(606);
  const double t = 0.2;
  std::size_t clusters = 0, pairs = 0, violations = 0;
  double worst = 0.0;
  while (clusters < 200) {
    const std::size_t n = 2 + uniform_index(rng, 4), m = 2 + uniform_index(rng, 11);
    auto privates = make_privates(n, 16, rng);
    auto publics = imaging::synthesize_images(6, 16, 16, imaging::SyntheticStyle::shapes, rng);
    instahide::GenerationConfig cfg{.num_private = n, .copies = m, .mix_count = 4, .epsilon = uniform(rng, 0.05, 0.6),
                                    .cluster_size = m};
    auto ds = instahide::generate_dataset(privates, cfg, publics, rng);
    auto neighbours = clustering::oracle_neighbours(ds.encryptions, t);
    std::map<std::int64_t, clustering::Cluster> by_target;
    for (std::size_t i = 0; i < ds.encryptions.size(); ++i) {
      by_target[ds.encryptions[i].oracle->target.source_id].members.push_back(i);
    }
    for (auto& [id, c] : by_target) {
      if (clusters == 200) break;
      ++clusters;
      c.seed = c.members[uniform_index(rng, c.members.size())];
      const auto kept = clustering::filter_cluster(c, neighbours).cluster.members;
      for (auto i : kept)
        for (auto j : kept) {
          if (i >= j) continue;
          ++pairs;
          const double d = imaging::epsilon_distance(ds.encryptions[i].oracle->target.params,
                                                     ds.encryptions[j].oracle->target.params, 16, 16);
          worst = std::max(worst, d);
          if (!(d < 2 * t)) ++violations;
        }
    }
  }
  return {violations == 0, fmt("%.0f retained pairs in %.0f clusters, max distance %.3f, %.0f violations",
                               pairs, clusters, worst, violations)};
}

// ---------------------------------------------------------------- 7

Outcome carlini_sanity() {
  Rng rng(707);
  const std::size_t n = 4, m = 8, side = 32;
  std::vector<instahide::PrivateImage> privates;
  for (std::size_t i = 0; i < n; ++i) {
    privates.push_back(
        {imaging::to_nonnegative(imaging::synthesize_image(side, side, imaging::SyntheticStyle::shapes, rng, i)), i});
  }
  instahide::GenerationConfig cfg{.num_private = n, .copies = 1, .mix_count = 2, .epsilon = 0.0, .cluster_size = m,
                                  .blank_partner = true, .sign_flip = false};
  auto ds = instahide::generate_dataset(privates, cfg, {}, rng);
  std::vector<Image> encs;
  std::vector<baselines::CoefficientRow> rows;
  for (const auto& e : ds.encryptions) {
    encs.push_back(e.image);
    rows.push_back({{static_cast<std::size_t>(e.oracle->target.source_id), e.oracle->lambdas[0]}});
  }
  auto result = baselines::carlini_attack(baselines::make_carlini_problem(encs, rows, n));
  bool monotone = true;
  for (std::size_t i = 1; i < result.objective_history.size(); ++i) {
    monotone = monotone && result.objective_history[i] <= result.objective_history[i - 1];
  }
  double worst = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    worst = std::min(worst, metrics::mssim(baselines::carlini_image(result, j, side, side), privates[j].image));
  }
  return {worst > 0.95 && monotone,
          fmt("min per-image SSIM %.4f, final objective %.2e, ", worst, result.objective) +
              (monotone ? "objective non-increasing" : "objective INCREASED")};
}

// ---------------------------------------------------------------- 8-11

class ToyExperiments {
 public:
  explicit ToyExperiments(fs::path work) : work_(std::move(work)) {}

  // The seeded toy experiment: N = 16 targets at 32x32, |M| = 10, eps = 0.2,
  // k = 6, ground-truth clusters.
  harness::ExperimentConfig base(const fs::path& root) const {
    auto cfg = harness::make_config({{"experiment.seed", "1"},
                                     {"data.image_size", "32"},
                                     {"data.targets", "16"},
                                     {"data.cluster_size", "10"},
                                     {"data.epsilon", "0.2"},
                                     {"data.mix_count", "6"},
                                     {"attack.oracle_clusters", "true"},
                                     {"attack.filter", "none"}});
    harness::set_root(cfg, root);
    return cfg;
  }

  harness::AttackReport run(const harness::ExperimentConfig& cfg, harness::StageSelection select = {}) const {
    fs::remove_all(cfg.paths.data.parent_path());
    harness::gen_data(cfg);
    harness::train_fdn_stage(cfg);
    return harness::attack_stage(cfg, select);
  }

  const harness::AttackReport& full() {
    if (!full_) full_ = run(base(work_ / "toy"));
    return *full_;
  }

  double fdn_mean(const std::string& name, const std::function<void(harness::ExperimentConfig&)>& tweak) {
    auto cfg = base(work_ / name);
    tweak(cfg);
    cfg.attack.run_ca = cfg.attack.run_ca_cn = cfg.attack.run_avg = false;
    return run(cfg).mean("FDN");
  }

  const fs::path& work() const { return work_; }

 private:
  fs::path work_;
  std::optional<harness::AttackReport> full_;
};

Outcome desk_attack(ToyExperiments& toy) {
  const auto& report = toy.full();
  const double fdn = report.mean("FDN"), avg = report.mean("AVG"), ca = report.mean("CA"), cacn = report.mean("CA-CN");
  return {fdn > avg && fdn > ca && fdn > cacn,
          fmt("mean SSIM FDN %.4f, AVG %.4f, CA %.4f, CA-CN %.4f", fdn, avg, ca, cacn)};
}

Outcome trends(ToyExperiments& toy) {
  std::map<std::pair<std::size_t, double>, double> fdn;
  for (std::size_t m : {4, 10}) {
    for (double eps : {0.1, 0.4}) {
      fdn[{m, eps}] = toy.fdn_mean("trend_m" + std::to_string(m) + "_eps" + harness::format_real(eps),
                                   [&](harness::ExperimentConfig& c) {
                                     c.data.cluster_size = m;
                                     c.data.epsilon = eps;
                                   });
    }
  }
  const double m10 = (fdn[{10, 0.1}] + fdn[{10, 0.4}]) / 2, m4 = (fdn[{4, 0.1}] + fdn[{4, 0.4}]) / 2;
  const double e1 = (fdn[{4, 0.1}] + fdn[{10, 0.1}]) / 2, e4 = (fdn[{4, 0.4}] + fdn[{10, 0.4}]) / 2;
  std::string cells;
  for (const auto& [key, v] : fdn) cells += fmt(" (%.0f, %.1f): %.4f", key.first, key.second, v);
  return {m10 > m4 && e1 > e4,
          fmt("FDN |M|=10 %.4f vs |M|=4 %.4f; eps=0.1 %.4f vs eps=0.4 %.4f;", m10, m4, e1, e4) + cells};
}

Outcome ablations(ToyExperiments& toy) {
  const double full = toy.full().mean("FDN");
  const double no_rw = toy.fdn_mean("ablation_no_reweight", [](auto& c) { c.fdn.model.use_reweight = false; });
  const double no_relax = toy.fdn_mean("ablation_no_relax", [](auto& c) { c.fdn.model.use_relax = false; });
  const double l1 = toy.fdn_mean("ablation_l1", [](auto& c) { c.fdn.train.loss = metrics::LossKind::l1; });
  const double l2 = toy.fdn_mean("ablation_l2", [](auto& c) { c.fdn.train.loss = metrics::LossKind::l2; });
  const double floor = std::max({no_rw, no_relax, l1, l2}) - 0.01;
  return {full >= floor && l2 < l1,
          fmt("full %.4f, no reweight %.4f, no relax %.4f, ", full, no_rw, no_relax) + fmt("l1 %.4f, l2 %.4f", l1, l2)};
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(entry.path(), root).string()] = ss.str();
  }
  return out;
}

Outcome determinism(ToyExperiments& toy) {
  toy.full();
  const auto again_root = toy.work() / "toy_again";
  toy.run(toy.base(again_root));
  const auto first = tree_contents(toy.work() / "toy"), second = tree_contents(again_root);
  std::size_t differing = 0, images = 0;
  for (const auto& [name, bytes] : first) {
    auto it = second.find(name);
    if (it == second.end() || it->second != bytes) ++differing;
    if (name.ends_with(".ppm")) ++images;
  }
  const bool has_all = first.count("checkpoints/fdn.mxw") && first.count("output/report.csv") && images > 0;
  return {differing == 0 && first.size() == second.size() && has_all,
          fmt("%.0f files compared (%.0f images), %.0f differ", first.size(), images, differing)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::current_path() / "acceptance_work";
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else {
      selected.insert(std::atoi(arg.c_str()));
    }
  }
  ToyExperiments toy(work);

  const std::vector<Criterion> criteria = {
      {1, "gradient suite", 120, gradient_suite},
      {2, "encryption exactness", 30, encryption_exactness},
      {3, "metric oracle", 60, metric_oracle},
      {4, "re-weighting", 60, reweighting},
      {5, "clustering oracle equivalence", 120, clustering_oracle},
      {6, "filtering guarantee", 120, filtering_guarantee},
      {7, "carlini baseline sanity", 180, carlini_sanity},
      {8, "end-to-end desk attack", 1800, [&] { return desk_attack(toy); }},
      {9, "trend reproduction", 2700, [&] { return trends(toy); }},
      {10, "ablation ordering", 3600, [&] { return ablations(toy); }},
      {11, "determinism", 0, [&] { return determinism(toy); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_seconds <= 0 || seconds < c.budget_seconds;
    const bool pass = outcome.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("[%s] %2d %s (%.1f s%s): %s\n", pass ? "PASS" : "FAIL", c.id, c.name, seconds,
                in_time ? "" : fmt(", over %.0f s budget", c.budget_seconds).c_str(), outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
