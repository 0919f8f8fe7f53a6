// SPDX-License-Identifier: Apache-2.0
// mixcrypt: batch front end for the attack pipeline.
//
//   mixcrypt gen-data --config exp.ini
//   mixcrypt train-fdn --config exp.ini
//   mixcrypt attack --config exp.ini --oracle-clusters
//   mixcrypt sweep --config exp.ini --m 4,10 --eps 0.1,0.4
//
// Every subcommand reads the same config file; --set section.key=value
// overrides single entries and --root relocates all artifact directories.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>

#include "mixcrypt/errors.hpp"
#include "mixcrypt/harness/config.hpp"
#include "mixcrypt/harness/pipeline.hpp"

namespace {

using namespace mixcrypt;

struct CommonOptions {
  std::string config;
  std::string root;
  std::vector<std::string> overrides;
  bool quiet = false;
};

harness::ExperimentConfig resolve(const CommonOptions& opt) {
  harness::ConfigEntries entries;
  if (!opt.config.empty()) entries = harness::load_config_file(opt.config);
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ParameterError("--set expects section.key=value, got '" + kv + "'");
    entries[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  auto cfg = harness::make_config(entries);
  if (!opt.root.empty()) harness::set_root(cfg, opt.root);
  return cfg;
}

void print_report(const harness::AttackReport& report) {
  for (const auto& [method, mean] : report.means()) {
    std::printf("%-6s mean SSIM %.4f over %zu targets\n", method.c_str(), mean,
                static_cast<std::size_t>(std::count_if(report.rows.begin(), report.rows.end(),
                                                       [&](const auto& r) { return r.method == method; })));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attack pipeline against mixing-based image encryption"};
  app.require_subcommand(1);
  CommonOptions opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config, "Experiment config (key = value with [section] headers)")
        ->check(CLI::ExistingFile);
    sub->add_option("--root", opt.root, "Place data/, checkpoints/ and output/ below this directory");
    sub->add_option("--set", opt.overrides, "Override one entry, e.g. --set fdn.epochs=5");
    sub->add_flag("-q,--quiet", opt.quiet, "Only print results");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate training and attacked encryptions");
  auto* train_cmp = app.add_subcommand("train-comparative", "Train the pair scorer used for clustering");
  auto* cluster = app.add_subcommand("cluster", "Cluster the attacked encryptions");
  auto* train_filter = app.add_subcommand("train-filter", "Train the t_eps neighbour filter");
  auto* filter = app.add_subcommand("filter", "Filter the saved clusters");
  auto* train_fdn = app.add_subcommand("train-fdn", "Train the fusion-denoising network");
  auto* attack = app.add_subcommand("attack", "Cluster, filter, restore and evaluate");
  auto* baseline = app.add_subcommand("baseline", "Run only the averaging and Carlini baselines");
  auto* eval = app.add_subcommand("eval", "Recompute the report from saved restorations");
  auto* sweep = app.add_subcommand("sweep", "Repeat gen-data, train-fdn and attack over a parameter grid");
  for (auto* sub : {gen, train_cmp, cluster, train_filter, filter, train_fdn, attack, baseline, eval, sweep}) {
    add_common(sub);
  }

  bool oracle_clusters = false, no_oracle = false;
  std::string filter_mode;
  for (auto* sub : {cluster, attack, baseline, sweep}) {
    sub->add_flag("--oracle-clusters", oracle_clusters, "Use ground-truth clusters instead of the comparative net");
  }
  for (auto* sub : {attack, baseline, sweep}) {
    sub->add_flag("--no-oracle", no_oracle, "Never fall back to oracle coefficients when labels are ambiguous");
  }
  for (auto* sub : {filter, attack, baseline, sweep}) {
    sub->add_option("--filter", filter_mode, "Filter mode: none, oracle or model")
        ->check(CLI::IsMember({"none", "oracle", "model"}));
  }
  std::vector<std::size_t> sweep_m, sweep_k;
  std::vector<double> sweep_eps;
  sweep->add_option("--m", sweep_m, "Cluster sizes")->delimiter(',');
  sweep->add_option("--eps", sweep_eps, "Augmentation levels")->delimiter(',');
  sweep->add_option("--k", sweep_k, "Mix counts")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = resolve(opt);
    if (oracle_clusters) cfg.attack.oracle_clusters = true;
    if (no_oracle) cfg.attack.oracle_lambda = false;
    if (!filter_mode.empty()) cfg.attack.filter = harness::parse_filter_mode(filter_mode);
    const harness::Log log = opt.quiet ? harness::Log{} : harness::Log([](const std::string& line) {
      std::cerr << line << '\n';
    });

    if (gen->parsed()) {
      const auto s = harness::gen_data(cfg, log);
      std::printf("encryptions %zu\ndigest %s\n", s.test_encryptions, s.digest.c_str());
    } else if (train_cmp->parsed()) {
      const auto r = harness::train_comparative_stage(cfg, log);
      std::printf("held-out pair accuracy %.4f\n", r.heldout_accuracy);
    } else if (cluster->parsed()) {
      const auto c = harness::cluster_stage(cfg, cfg.attack.oracle_clusters, log);
      std::printf("%zu clusters written to %s\n", c.clusters.size(), harness::clusters_path(cfg).string().c_str());
    } else if (train_filter->parsed()) {
      const auto r = harness::train_filter_stage(cfg, log);
      std::printf("held-out pair accuracy %.4f\n", r.heldout_accuracy);
    } else if (filter->parsed()) {
      const auto c = harness::filter_stage(cfg, log);
      std::printf("%zu clusters written to %s\n", c.size(), harness::filtered_clusters_path(cfg).string().c_str());
    } else if (train_fdn->parsed()) {
      const auto r = harness::train_fdn_stage(cfg, log);
      std::printf("final epoch loss %.6f\n", r.epoch_loss.back());
    } else if (attack->parsed()) {
      print_report(harness::attack_stage(cfg, {}, log));
    } else if (baseline->parsed()) {
      print_report(harness::attack_stage(cfg, {.fdn = false, .baselines = true}, log));
    } else if (eval->parsed()) {
      print_report(harness::eval_stage(cfg, log));
    } else if (sweep->parsed()) {
      const auto cells = harness::sweep_stage(cfg, {sweep_m, sweep_eps, sweep_k}, log);
      for (const auto& cell : cells) {
        for (const auto& [method, mean] : cell.means) {
          std::printf("m=%zu eps=%g k=%zu %-6s %.4f\n", cell.m, cell.epsilon, cell.k, method.c_str(), mean);
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "mixcrypt: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
