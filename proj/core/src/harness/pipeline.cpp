// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/harness/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "mixcrypt/autodiff/checkpoint.hpp"
#include "mixcrypt/baselines/baselines.hpp"
#include "mixcrypt/clustering/comparative.hpp"
#include "mixcrypt/clustering/filter.hpp"
#include "mixcrypt/imaging/io.hpp"
#include "mixcrypt/imaging/synthetic.hpp"
#include "mixcrypt/metrics/metrics.hpp"
#include "mixcrypt/parallel.hpp"
#include "mixcrypt/restoration/fdn.hpp"

namespace mixcrypt::harness {

namespace fs = std::filesystem;
using clustering::Cluster;
using imaging::Image;
using instahide::Encryption;
using instahide::PrivateImage;

MissingArtifactError::MissingArtifactError(const fs::path& path, std::string_view stage)
    : DataError("missing " + path.string() + "; run '" + std::string(stage) + "' first") {}

fs::path train_data_path(const ExperimentConfig& c) { return c.paths.data / "train.mxd"; }
fs::path test_data_path(const ExperimentConfig& c) { return c.paths.data / "test.mxd"; }
fs::path train_privates_path(const ExperimentConfig& c) { return c.paths.data / "train_privates.mxd"; }
fs::path test_privates_path(const ExperimentConfig& c) { return c.paths.data / "test_privates.mxd"; }
fs::path comparative_checkpoint_path(const ExperimentConfig& c) { return c.paths.checkpoints / "comparative.mxw"; }
fs::path filter_checkpoint_path(const ExperimentConfig& c) { return c.paths.checkpoints / "filter.mxw"; }
fs::path fdn_checkpoint_path(const ExperimentConfig& c) { return c.paths.checkpoints / "fdn.mxw"; }
fs::path clusters_path(const ExperimentConfig& c) { return c.paths.output / "clusters.txt"; }
fs::path assignments_path(const ExperimentConfig& c) { return c.paths.output / "assignments.csv"; }
fs::path filtered_clusters_path(const ExperimentConfig& c) { return c.paths.output / "filtered_clusters.txt"; }
fs::path restored_path(const ExperimentConfig& c) { return c.paths.output / "restored.mxd"; }
fs::path restored_index_path(const ExperimentConfig& c) { return c.paths.output / "restored.csv"; }
fs::path report_path(const ExperimentConfig& c) { return c.paths.output / "report.csv"; }

namespace {

void say(const Log& log, const std::string& text) {
  if (log) log(text);
}

void require(const fs::path& path, std::string_view stage) {
  if (!fs::exists(path)) throw MissingArtifactError(path, stage);
}

std::vector<Encryption> load_encryptions(const fs::path& path) {
  require(path, "gen-data");
  return imaging::load_dataset_bin(path);
}

std::vector<PrivateImage> load_privates(const fs::path& path) {
  require(path, "gen-data");
  std::vector<PrivateImage> out;
  for (auto& r : imaging::load_dataset_bin(path)) {
    if (r.label.empty()) throw FormatError("private image record without a class label in " + path.string());
    const auto cls = static_cast<std::size_t>(std::max_element(r.label.begin(), r.label.end()) - r.label.begin());
    out.push_back({std::move(r.image), cls});
  }
  return out;
}

void save_privates(const std::vector<PrivateImage>& privates, std::size_t num_classes, const fs::path& path) {
  std::vector<imaging::DatasetRecord> records;
  for (const auto& p : privates) {
    std::vector<double> label(num_classes, 0.0);
    label.at(p.class_id) = 1.0;
    records.push_back({p.image, std::move(label), std::nullopt});
  }
  imaging::save_dataset_bin(records, path);
}

/// Ground-truth partition by target source, ordered by source id.
std::vector<Cluster> truth_clusters(std::span<const Encryption> encs, std::vector<std::int64_t>* sources = nullptr) {
  std::map<std::int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < encs.size(); ++i) {
    if (!encs[i].oracle) throw DataError("encryption " + std::to_string(i) + " has no oracle block");
    groups[encs[i].oracle->target.source_id].push_back(i);
  }
  std::vector<Cluster> out;
  for (auto& [source, members] : groups) {
    if (sources) sources->push_back(source);
    out.push_back({members, members.front()});
  }
  return out;
}

std::vector<clustering::ImageViews> encryption_views(std::span<const Encryption> encs) {
  std::vector<clustering::ImageViews> views;
  views.reserve(encs.size());
  for (const auto& e : encs) views.push_back(clustering::image_views(imaging::abs_image(e.image)));
  return views;
}

clustering::ComparativeConfig net_config(const PairNetSettings& s) {
  return {.filters = s.filters, .blocks = s.blocks, .multi_resolution = s.multi_resolution};
}

clustering::PairTrainConfig pair_train_config(const PairNetSettings& s) {
  return {.epochs = s.epochs, .pairs_per_epoch = s.pairs_per_epoch, .batch_size = s.batch_size,
          .learning_rate = s.learning_rate};
}

void write_pair_log(const fs::path& path, const clustering::PairTrainResult& r) {
  std::ofstream out(path, std::ios::binary);
  out << "epoch,train_bce,heldout_bce\n";
  for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
    out << e + 1 << ',' << format_real(r.train_loss[e]) << ',' << format_real(r.heldout_loss[e]) << '\n';
  }
  out << "# heldout_accuracy " << format_real(r.heldout_accuracy) << '\n';
}

void save_clusters(const std::vector<Cluster>& clusters, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  clustering::write_clusters(out, clusters);
}

std::vector<Cluster> load_clusters(const fs::path& path, std::string_view stage) {
  require(path, stage);
  std::ifstream in(path, std::ios::binary);
  return clustering::read_clusters(in);
}

void save_assignments(const std::vector<ClusterAssignment>& a, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "encryption,primary,secondary\n";
  for (std::size_t i = 0; i < a.size(); ++i) out << i << ',' << a[i].primary << ',' << a[i].secondary << '\n';
}

/// Majority target source among cluster members; ties go to the lower id.
std::int64_t majority_source(const Cluster& c, std::span<const Encryption> encs) {
  std::map<std::int64_t, std::size_t> count;
  for (auto id : c.members) ++count[encs[id].oracle->target.source_id];
  std::int64_t best = count.begin()->first;
  for (const auto& [source, n] : count) {
    if (n > count[best]) best = source;
  }
  return best;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

/// One restoration target: a cluster, its coefficients and ground truth.
struct Target {
  std::size_t cluster = 0;
  std::int64_t source = 0;
  std::vector<Image> members;
  std::vector<double> lambdas;
  Image truth;
};

/// Partner coefficient of an encryption whose target class is `cls`: the
/// other nonzero label entry, the oracle value when inference fails and the
/// oracle is allowed, else 0.
double partner_lambda(const Encryption& e, std::size_t cls, bool allow_oracle) {
  std::vector<double> others;
  for (std::size_t c = 0; c < e.label.size(); ++c) {
    if (c != cls && e.label[c] > 0.0) others.push_back(e.label[c]);
  }
  if (others.size() == 1) return others.front();
  if (allow_oracle && e.oracle && e.oracle->lambdas.size() > 1 && e.oracle->partner.source_id >= 0) {
    return e.oracle->lambdas[1];
  }
  return 0.0;
}

struct RestoredEntry {
  std::int64_t target_id = 0;
  std::string method;
  std::size_t m_used = 0;
};

void save_restored(const std::vector<RestoredEntry>& index, const std::vector<Image>& images, const fs::path& data,
                   const fs::path& csv) {
  std::vector<imaging::DatasetRecord> records;
  for (const auto& img : images) records.push_back({img, {}, std::nullopt});
  imaging::save_dataset_bin(records, data);
  std::ofstream out(csv, std::ios::binary);
  out << "record,target_id,method,m_used\n";
  for (std::size_t i = 0; i < index.size(); ++i) {
    out << i << ',' << index[i].target_id << ',' << index[i].method << ',' << index[i].m_used << '\n';
  }
}

std::vector<RestoredEntry> load_restored_index(const fs::path& csv) {
  require(csv, "attack");
  std::ifstream in(csv, std::ios::binary);
  std::string line;
  std::getline(in, line);
  std::vector<RestoredEntry> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string rec, tid, method, m;
    if (!std::getline(ss, rec, ',') || !std::getline(ss, tid, ',') || !std::getline(ss, method, ',') ||
        !std::getline(ss, m, ',')) {
      throw FormatError("malformed restored index line '" + line + "'");
    }
    out.push_back({std::stoll(tid), method, static_cast<std::size_t>(std::stoull(m))});
  }
  return out;
}

}  // namespace

std::string dataset_digest(const std::vector<Encryption>& records) {
  std::ostringstream os(std::ios::binary);
  imaging::write_dataset(os, records);
  return hex64(fnv1a64(os.str()));
}

Corpus make_corpus(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  const std::size_t s = d.image_size;
  Corpus corpus;
  if (!d.zero_noise) {
    Rng rng = stage_rng(cfg.seed, "corpus-public");
    corpus.publics = imaging::synthesize_images(d.public_pool, s, s, imaging::SyntheticStyle::shapes, rng);
  }
  auto privates = [&](std::size_t count, std::string_view tag) {
    Rng rng = stage_rng(cfg.seed, tag);
    std::vector<PrivateImage> out;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t cls = uniform_index(rng, d.num_classes);
      Image img = imaging::synthesize_image(s, s, imaging::SyntheticStyle::shapes, rng, cls);
      out.push_back({d.zero_noise ? imaging::to_nonnegative(img) : std::move(img), cls});
    }
    return out;
  };
  corpus.train = privates(d.train_targets, "corpus-train");
  corpus.test = privates(d.targets, "corpus-test");
  return corpus;
}

instahide::GenerationConfig generation_config(const DataSettings& d, std::size_t num_private) {
  return {.num_private = num_private,
          .copies = d.resolved_copies(),
          .mix_count = d.mix_count,
          .epsilon = d.epsilon,
          .num_classes = d.num_classes,
          .cluster_size = d.cluster_size,
          .blank_partner = d.zero_noise,
          .sign_flip = !d.zero_noise};
}

GenDataSummary gen_data(const ExperimentConfig& cfg, const Log& log) {
  validate(cfg);
  fs::create_directories(cfg.paths.data);
  const Corpus corpus = make_corpus(cfg);
  GenDataSummary summary;
  if (cfg.data.train_targets >= 2) {
    Rng rng = stage_rng(cfg.seed, "generate-train");
    auto train = instahide::generate_dataset(corpus.train, generation_config(cfg.data, corpus.train.size()),
                                             corpus.publics, rng);
    imaging::save_dataset_bin(train.encryptions, train_data_path(cfg));
    summary.train_encryptions = train.encryptions.size();
  }
  save_privates(corpus.train, cfg.data.num_classes, train_privates_path(cfg));
  Rng rng = stage_rng(cfg.seed, "generate-test");
  auto test = instahide::generate_dataset(corpus.test, generation_config(cfg.data, corpus.test.size()),
                                          corpus.publics, rng);
  imaging::save_dataset_bin(test.encryptions, test_data_path(cfg));
  save_privates(corpus.test, cfg.data.num_classes, test_privates_path(cfg));
  summary.test_encryptions = test.encryptions.size();
  summary.digest = dataset_digest(test.encryptions);
  say(log, "gen-data: " + std::to_string(summary.train_encryptions) + " training and " +
               std::to_string(summary.test_encryptions) + " attacked encryptions, digest " + summary.digest);
  return summary;
}

clustering::PairTrainResult train_comparative_stage(const ExperimentConfig& cfg, const Log& log) {
  auto encs = load_encryptions(train_data_path(cfg));
  Rng init = stage_rng(cfg.seed, "comparative-init");
  clustering::ComparativeNet net(net_config(cfg.comparative), init);
  Rng rng = stage_rng(cfg.seed, "comparative-train");
  auto result = clustering::train_comparative(net, encs, pair_train_config(cfg.comparative), rng,
                                              [&](std::size_t e, double tr, double ho) {
                                                say(log, "train-comparative: epoch " + std::to_string(e + 1) +
                                                             " bce " + format_real(tr) + " held-out " +
                                                             format_real(ho));
                                              });
  fs::create_directories(cfg.paths.checkpoints);
  ad::save_checkpoint(comparative_checkpoint_path(cfg), net.parameters());
  write_pair_log(cfg.paths.checkpoints / "comparative_log.csv", result);
  say(log, "train-comparative: held-out pair accuracy " + format_real(result.heldout_accuracy));
  return result;
}

clustering::PairTrainResult train_filter_stage(const ExperimentConfig& cfg, const Log& log) {
  auto encs = load_encryptions(train_data_path(cfg));
  Rng init = stage_rng(cfg.seed, "filter-init");
  clustering::FilterModel model{clustering::ComparativeNet(net_config(cfg.filter), init), cfg.attack.filter_threshold};
  Rng rng = stage_rng(cfg.seed, "filter-train");
  const auto clusters = truth_clusters(encs);
  auto result = clustering::train_filter(model, encs, clusters, pair_train_config(cfg.filter), rng,
                                         [&](std::size_t e, double tr, double ho) {
                                           say(log, "train-filter: epoch " + std::to_string(e + 1) + " bce " +
                                                        format_real(tr) + " held-out " + format_real(ho));
                                         });
  fs::create_directories(cfg.paths.checkpoints);
  ad::save_checkpoint(filter_checkpoint_path(cfg), model.net.parameters());
  write_pair_log(cfg.paths.checkpoints / "filter_log.csv", result);
  return result;
}

restoration::FdnTrainResult train_fdn_stage(const ExperimentConfig& cfg, const Log& log) {
  auto encs = load_encryptions(train_data_path(cfg));
  const auto privates = load_privates(train_privates_path(cfg));
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& c : truth_clusters(encs)) groups.push_back(c.members);
  // The attacker owns the training data, so oracle coefficients are fair game.
  auto pairs = restoration::make_training_pairs(encs, groups, privates, true);
  Rng init = stage_rng(cfg.seed, "fdn-init");
  restoration::FdnModel model(cfg.fdn.model, init);
  Rng rng = stage_rng(cfg.seed, "fdn-train");
  auto result = restoration::train_fdn(model, pairs, cfg.fdn.train, rng, [&](std::size_t e, double loss) {
    say(log, "train-fdn: epoch " + std::to_string(e + 1) + " loss " + format_real(loss));
  });
  fs::create_directories(cfg.paths.checkpoints);
  ad::save_checkpoint(fdn_checkpoint_path(cfg), model.parameters());
  std::ofstream out(cfg.paths.checkpoints / "fdn_log.csv", std::ios::binary);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) out << e + 1 << ',' << format_real(result.epoch_loss[e]) << '\n';
  return result;
}

Clustering cluster_stage(const ExperimentConfig& cfg, bool oracle, const Log& log) {
  const auto encs = load_encryptions(test_data_path(cfg));
  Clustering out;
  if (oracle) {
    std::vector<std::int64_t> sources;
    out.clusters = truth_clusters(encs, &sources);
    std::map<std::int64_t, std::int64_t> index;
    for (std::size_t c = 0; c < sources.size(); ++c) index[sources[c]] = static_cast<std::int64_t>(c);
    for (const auto& e : encs) {
      auto partner = index.find(e.oracle->partner.source_id);
      out.assignments.push_back({index.at(e.oracle->target.source_id), partner == index.end() ? -1 : partner->second});
    }
  } else {
    require(comparative_checkpoint_path(cfg), "train-comparative");
    Rng init = stage_rng(cfg.seed, "comparative-init");
    clustering::ComparativeNet net(net_config(cfg.comparative), init);
    ad::restore_parameters(ad::load_checkpoint(comparative_checkpoint_path(cfg)), net.parameters());
    const auto attacker_view = instahide::strip_oracle(encs);
    const auto views = encryption_views(attacker_view);
    auto graph = clustering::build_similarity_graph(
        views.size(), [&](std::size_t i, std::size_t j) { return net.symmetric_score(views[i], views[j]); });
    const std::size_t expected = cfg.data.cluster_size.value_or(2 * cfg.data.resolved_copies());
    auto cliques = clustering::extract_cliques(graph, cfg.data.targets, expected);
    auto assignment = clustering::assign_encryptions(graph, cliques);
    out.clusters = clustering::primary_clusters(assignment, cliques);
    for (const auto& a : assignment) {
      out.assignments.push_back({static_cast<std::int64_t>(a.primary),
                                 a.secondary ? static_cast<std::int64_t>(*a.secondary) : -1});
    }
  }
  fs::create_directories(cfg.paths.output);
  save_clusters(out.clusters, clusters_path(cfg));
  save_assignments(out.assignments, assignments_path(cfg));
  say(log, std::string("cluster: ") + std::to_string(out.clusters.size()) + " clusters from " +
               std::to_string(encs.size()) + " encryptions" + (oracle ? " (oracle)" : ""));
  return out;
}

std::vector<Cluster> filter_stage(const ExperimentConfig& cfg, const Log& log) {
  auto clusters = load_clusters(clusters_path(cfg), "cluster");
  std::vector<Cluster> out;
  if (cfg.attack.filter == FilterMode::none) {
    out = clusters;
  } else {
    const auto encs = load_encryptions(test_data_path(cfg));
    clustering::NeighbourFn neighbours;
    std::optional<clustering::FilterModel> model;
    std::vector<clustering::ImageViews> views;
    if (cfg.attack.filter == FilterMode::oracle) {
      neighbours = clustering::oracle_neighbours(encs, cfg.attack.filter_threshold);
    } else {
      require(filter_checkpoint_path(cfg), "train-filter");
      Rng init = stage_rng(cfg.seed, "filter-init");
      model.emplace(clustering::FilterModel{clustering::ComparativeNet(net_config(cfg.filter), init),
                                            cfg.attack.filter_threshold});
      ad::restore_parameters(ad::load_checkpoint(filter_checkpoint_path(cfg)), model->net.parameters());
      views = encryption_views(instahide::strip_oracle(encs));
      neighbours = clustering::model_neighbours(*model, views);
    }
    for (const auto& c : clusters) {
      // Singletons and empty clusters pass through; there is nothing to compare.
      out.push_back(c.members.size() < 2 ? c : clustering::filter_cluster(c, neighbours).cluster);
    }
  }
  fs::create_directories(cfg.paths.output);
  save_clusters(out, filtered_clusters_path(cfg));
  std::size_t before = 0, after = 0;
  for (const auto& c : clusters) before += c.members.size();
  for (const auto& c : out) after += c.members.size();
  say(log, "filter (" + std::string(to_string(cfg.attack.filter)) + "): kept " + std::to_string(after) + " of " +
               std::to_string(before) + " clustered encryptions");
  return out;
}

AttackReport attack_stage(const ExperimentConfig& cfg, const StageSelection& select, const Log& log) {
  validate(cfg);
  const auto encs = load_encryptions(test_data_path(cfg));
  const auto privates = load_privates(test_privates_path(cfg));
  const bool allow_oracle = cfg.attack.oracle_lambda;
  if (select.fdn) require(fdn_checkpoint_path(cfg), "train-fdn");

  const auto grouping = cluster_stage(cfg, cfg.attack.oracle_clusters, log);
  const auto filtered = filter_stage(cfg, log);

  // Restoration targets: one per attacked source, taken from the cluster
  // holding most of its encryptions.
  std::vector<Target> targets;
  std::map<std::int64_t, std::pair<std::size_t, std::size_t>> best;  // source -> (count, target index)
  for (std::size_t c = 0; c < filtered.size(); ++c) {
    const auto& cluster = filtered[c];
    if (cluster.members.empty()) continue;
    std::vector<Encryption> members;
    for (auto id : cluster.members) members.push_back(encs.at(id));
    Target t;
    t.cluster = c;
    t.source = majority_source(cluster, encs);
    try {
      t.lambdas = instahide::cluster_lambdas(members, allow_oracle);
    } catch (const DataError& e) {
      say(log, "attack: cluster " + std::to_string(c) + " skipped: " + e.what());
      continue;
    }
    for (const auto& m : members) t.members.push_back(m.image);
    const auto rw = restoration::reweight(t.members, t.lambdas);
    const auto ref = restoration::reference_member(rw.variances, cluster.members);
    t.truth = instahide::realize_copy(members[ref].oracle->target, privates);
    std::size_t hits = 0;
    for (auto id : cluster.members) hits += encs[id].oracle->target.source_id == t.source;
    auto it = best.find(t.source);
    if (it != best.end() && it->second.first >= hits) continue;
    if (it != best.end()) targets[it->second.second].source = -1;  // superseded
    best[t.source] = {hits, targets.size()};
    targets.push_back(std::move(t));
  }
  std::erase_if(targets, [](const Target& t) { return t.source < 0; });
  std::sort(targets.begin(), targets.end(), [](const Target& a, const Target& b) { return a.source < b.source; });

  std::vector<RestoredEntry> index;
  std::vector<Image> images;
  for (const auto& t : targets) {
    index.push_back({t.source, "TRUTH", t.members.size()});
    images.push_back(t.truth);
  }

  if (select.fdn) {
    Rng init = stage_rng(cfg.seed, "fdn-init");
    restoration::FdnModel model(cfg.fdn.model, init);
    ad::restore_parameters(ad::load_checkpoint(fdn_checkpoint_path(cfg)), model.parameters());
    std::vector<Image> restored(targets.size());
    parallel_for(targets.size(), [&](std::size_t i) {
      ad::NoGradGuard no_grad;
      restored[i] = model.restore(targets[i].members, targets[i].lambdas);
    });
    for (std::size_t i = 0; i < targets.size(); ++i) {
      index.push_back({targets[i].source, "FDN", targets[i].members.size()});
      images.push_back(std::move(restored[i]));
    }
  }

  if (select.baselines && cfg.attack.run_avg) {
    for (const auto& t : targets) {
      index.push_back({t.source, "AVG", t.members.size()});
      images.push_back(baselines::averaging_attack(t.members, t.lambdas));
    }
  }

  const std::size_t side = cfg.data.image_size;
  const baselines::CarliniConfig ca_cfg{.iterations = cfg.attack.ca_iterations, .step_size = cfg.attack.ca_step};
  if (select.baselines && cfg.attack.run_ca && !targets.empty()) {
    // Ground-truth C: oracle coefficients at the true target and partner columns.
    std::vector<std::int64_t> sources;
    truth_clusters(encs, &sources);
    std::map<std::int64_t, std::size_t> column;
    for (std::size_t c = 0; c < sources.size(); ++c) column[sources[c]] = c;
    std::vector<Image> rows_img;
    std::vector<baselines::CoefficientRow> rows;
    for (const auto& e : encs) {
      baselines::CoefficientRow row{{column.at(e.oracle->target.source_id), e.oracle->lambdas[0]}};
      auto partner = column.find(e.oracle->partner.source_id);
      if (partner != column.end()) row.push_back({partner->second, e.oracle->lambdas[1]});
      rows.push_back(std::move(row));
      rows_img.push_back(e.image);
    }
    const auto result = baselines::carlini_attack(baselines::make_carlini_problem(rows_img, rows, sources.size()), ca_cfg);
    for (const auto& t : targets) {
      index.push_back({t.source, "CA", t.members.size()});
      images.push_back(baselines::carlini_image(result, column.at(t.source), side, side));
    }
  }

  if (select.baselines && cfg.attack.run_ca_cn && !targets.empty()) {
    // C from the clustering: label-inferred coefficients at the primary and
    // secondary cluster columns.
    const auto& clusters = grouping.clusters;
    std::vector<std::optional<std::size_t>> cluster_class(clusters.size());
    std::vector<double> lambda1(encs.size(), 0.0);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (clusters[c].members.empty()) continue;
      std::vector<Encryption> members;
      for (auto id : clusters[c].members) members.push_back(encs[id]);
      try {
        auto l = instahide::cluster_lambdas(members, allow_oracle);
        for (std::size_t i = 0; i < l.size(); ++i) lambda1[clusters[c].members[i]] = l[i];
        cluster_class[c] = instahide::infer_cluster_class(members);
      } catch (const DataError&) {
        // Rows of this cluster stay empty; their mass is left to the residual.
      }
    }
    std::vector<Image> rows_img;
    std::vector<baselines::CoefficientRow> rows;
    for (std::size_t i = 0; i < encs.size(); ++i) {
      const auto& a = grouping.assignments[i];
      baselines::CoefficientRow row;
      if (a.primary >= 0 && lambda1[i] > 0.0) {
        row.push_back({static_cast<std::size_t>(a.primary), lambda1[i]});
        const auto cls = cluster_class[static_cast<std::size_t>(a.primary)];
        if (a.secondary >= 0 && cls) {
          const double l2 = partner_lambda(encs[i], *cls, allow_oracle);
          if (l2 > 0.0) row.push_back({static_cast<std::size_t>(a.secondary), l2});
        }
      }
      rows.push_back(std::move(row));
      rows_img.push_back(encs[i].image);
    }
    const auto result =
        baselines::carlini_attack(baselines::make_carlini_problem(rows_img, rows, clusters.size()), ca_cfg);
    for (const auto& t : targets) {
      index.push_back({t.source, "CA-CN", t.members.size()});
      images.push_back(baselines::carlini_image(result, t.cluster, side, side));
    }
  }

  fs::create_directories(cfg.paths.output);
  save_restored(index, images, restored_path(cfg), restored_index_path(cfg));
  if (cfg.attack.write_images) {
    const fs::path dir = cfg.paths.output / "images";
    fs::create_directories(dir);
    for (std::size_t i = 0; i < index.size(); ++i) {
      std::string method = index[i].method;
      std::transform(method.begin(), method.end(), method.begin(), [](unsigned char ch) {
        return ch == '-' ? '_' : static_cast<char>(std::tolower(ch));
      });
      Image img = images[i];
      // AVG lives in [0, 1]; the PPM mapping expects [-1, 1].
      if (index[i].method == "AVG") {
        for (auto& v : img.pixels) v = 2.0 * v - 1.0;
      }
      imaging::save_image_ppm(img, dir / ("target" + std::to_string(index[i].target_id) + "_" + method + ".ppm"));
    }
  }
  return eval_stage(cfg, log);
}

AttackReport eval_stage(const ExperimentConfig& cfg, const Log& log) {
  const auto index = load_restored_index(restored_index_path(cfg));
  require(restored_path(cfg), "attack");
  const auto records = imaging::load_dataset_bin(restored_path(cfg));
  if (records.size() != index.size()) throw FormatError("restored images and their index disagree in length");
  std::map<std::int64_t, std::size_t> truth;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i].method == "TRUTH") truth[index[i].target_id] = i;
  }
  AttackReport report;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i].method == "TRUTH") continue;
    auto t = truth.find(index[i].target_id);
    if (t == truth.end()) throw FormatError("no ground truth stored for target " + std::to_string(index[i].target_id));
    const double ssim = metrics::mssim(records[i].image, records[t->second].image);
    report.rows.push_back({index[i].target_id, index[i].method, index[i].m_used, cfg.data.epsilon, cfg.data.mix_count,
                           std::clamp(ssim, -1.0, 1.0)});
  }
  report.sort();
  fs::create_directories(cfg.paths.output);
  save_report(report, report_path(cfg));
  for (const auto& [method, mean] : report.means()) say(log, "eval: " + method + " mean SSIM " + format_real(mean));
  return report;
}

std::vector<SweepCell> sweep_stage(const ExperimentConfig& cfg, const SweepSpec& spec, const Log& log) {
  std::vector<SweepCell> cells;
  const auto ms = spec.ms.empty() ? std::vector<std::size_t>{cfg.data.cluster_size.value_or(10)} : spec.ms;
  const auto eps = spec.epsilons.empty() ? std::vector<double>{cfg.data.epsilon} : spec.epsilons;
  const auto ks = spec.ks.empty() ? std::vector<std::size_t>{cfg.data.mix_count} : spec.ks;
  for (auto m : ms) {
    for (auto e : eps) {
      for (auto k : ks) {
        SweepCell cell{m, e, k, {}, {}};
        cell.root = cfg.paths.output / "sweep" / ("m" + std::to_string(m) + "_eps" + format_real(e) + "_k" + std::to_string(k));
        cells.push_back(std::move(cell));
      }
    }
  }
  std::mutex log_mutex;
  const Log cell_log = [&](const std::string& text) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(text);
  };
  parallel_for(cells.size(), [&](std::size_t i) {
    auto& cell = cells[i];
    ExperimentConfig c = cfg;
    c.data.cluster_size = cell.m;
    c.data.epsilon = cell.epsilon;
    c.data.mix_count = cell.k;
    set_root(c, cell.root);
    validate(c);
    fs::create_directories(cell.root);
    {
      std::ofstream out(cell.root / "config.ini", std::ios::binary);
      out << to_text(c);
    }
    const std::string tag = "sweep " + cell.root.filename().string() + ": ";
    const Log prefixed = [&](const std::string& text) { cell_log(tag + text); };
    gen_data(c, prefixed);
    if (!c.attack.oracle_clusters) train_comparative_stage(c, prefixed);
    if (c.attack.filter == FilterMode::model) train_filter_stage(c, prefixed);
    train_fdn_stage(c, prefixed);
    cell.means = attack_stage(c, {}, prefixed).means();
  });
  fs::create_directories(cfg.paths.output);
  std::ofstream out(cfg.paths.output / "sweep.csv", std::ios::binary);
  out << kSweepHeader << '\n';
  for (const auto& cell : cells) {
    for (const auto& [method, mean] : cell.means) {
      out << cell.m << ',' << format_real(cell.epsilon) << ',' << cell.k << ',' << method << ',' << format_real(mean)
          << '\n';
    }
  }
  return cells;
}

}  // namespace mixcrypt::harness
