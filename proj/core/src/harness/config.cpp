// SPDX-License-Identifier: Apache-2.0
#include "mixcrypt/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "mixcrypt/errors.hpp"

namespace mixcrypt::harness {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParameterError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParameterError(key + ": expected an unsigned 64-bit integer, got '" + v + "'");
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ParameterError(key + ": expected a finite number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ParameterError(key + ": expected true or false, got '" + v + "'");
}

std::string real_text(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string bool_text(bool v) { return v ? "true" : "false"; }

struct Binding {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MX_SIZE(KEY, FIELD)                                                                          \
  Binding {                                                                                          \
    KEY, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_size(k, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }                           \
  }
#define MX_REAL(KEY, FIELD)                                                                          \
  Binding {                                                                                          \
    KEY, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_real(k, v); }, \
        [](const ExperimentConfig& c) { return real_text(c.FIELD); }                                \
  }
#define MX_BOOL(KEY, FIELD)                                                                          \
  Binding {                                                                                          \
    KEY, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_bool(k, v); }, \
        [](const ExperimentConfig& c) { return bool_text(c.FIELD); }                                \
  }
#define MX_PATH(KEY, FIELD)                                                                          \
  Binding {                                                                                          \
    KEY, [](ExperimentConfig& c, const std::string&, const std::string& v) { c.FIELD = v; },         \
        [](const ExperimentConfig& c) { return c.FIELD.generic_string(); }                           \
  }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      {"experiment.seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      MX_SIZE("data.image_size", data.image_size),
      MX_SIZE("data.public_pool", data.public_pool),
      MX_SIZE("data.train_targets", data.train_targets),
      MX_SIZE("data.targets", data.targets),
      {"data.copies",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") {
           c.data.copies.reset();
         } else {
           c.data.copies = to_size(k, v);
         }
       },
       [](const ExperimentConfig& c) { return c.data.copies ? std::to_string(*c.data.copies) : std::string("auto"); }},
      MX_SIZE("data.mix_count", data.mix_count),
      MX_REAL("data.epsilon", data.epsilon),
      {"data.cluster_size",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "none") {
           c.data.cluster_size.reset();
         } else {
           c.data.cluster_size = to_size(k, v);
         }
       },
       [](const ExperimentConfig& c) {
         return c.data.cluster_size ? std::to_string(*c.data.cluster_size) : std::string("none");
       }},
      MX_SIZE("data.num_classes", data.num_classes),
      MX_BOOL("data.zero_noise", data.zero_noise),

      MX_SIZE("comparative.epochs", comparative.epochs),
      MX_REAL("comparative.learning_rate", comparative.learning_rate),
      MX_SIZE("comparative.pairs_per_epoch", comparative.pairs_per_epoch),
      MX_SIZE("comparative.batch_size", comparative.batch_size),
      MX_SIZE("comparative.filters", comparative.filters),
      MX_SIZE("comparative.blocks", comparative.blocks),
      MX_BOOL("comparative.multi_resolution", comparative.multi_resolution),

      MX_SIZE("filter.epochs", filter.epochs),
      MX_REAL("filter.learning_rate", filter.learning_rate),
      MX_SIZE("filter.pairs_per_epoch", filter.pairs_per_epoch),
      MX_SIZE("filter.batch_size", filter.batch_size),
      MX_SIZE("filter.filters", filter.filters),
      MX_SIZE("filter.blocks", filter.blocks),
      MX_BOOL("filter.multi_resolution", filter.multi_resolution),

      MX_SIZE("fdn.epochs", fdn.train.epochs),
      MX_REAL("fdn.learning_rate", fdn.train.learning_rate),
      MX_SIZE("fdn.batch_size", fdn.train.batch_size),
      {"fdn.loss",
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.fdn.train.loss = metrics::parse_loss_kind(v); },
       [](const ExperimentConfig& c) { return std::string(metrics::to_string(c.fdn.train.loss)); }},
      MX_REAL("fdn.lambda_mssim", fdn.train.lambda_mssim),
      MX_SIZE("fdn.relax_channels", fdn.model.relax_channels),
      MX_SIZE("fdn.relax_kernel", fdn.model.relax_kernel),
      MX_SIZE("fdn.denoiser_filters", fdn.model.denoiser_filters),
      MX_SIZE("fdn.residual_blocks", fdn.model.residual_blocks),
      MX_SIZE("fdn.attention_stride", fdn.model.attention_stride),
      MX_SIZE("fdn.attention_key_dim", fdn.model.attention_key_dim),
      MX_BOOL("fdn.reweight", fdn.model.use_reweight),
      MX_BOOL("fdn.relax", fdn.model.use_relax),
      {"fdn.fusion",
       [](ExperimentConfig& c, const std::string&, const std::string& v) {
         if (v == "auto") {
           c.fdn.model.fusion_override.reset();
         } else {
           c.fdn.model.fusion_override = restoration::parse_fusion_rule(v);
         }
       },
       [](const ExperimentConfig& c) {
         return c.fdn.model.fusion_override ? std::string(restoration::to_string(*c.fdn.model.fusion_override))
                                            : std::string("auto");
       }},

      MX_BOOL("attack.oracle_clusters", attack.oracle_clusters),
      {"attack.filter",
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.attack.filter = parse_filter_mode(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.attack.filter)); }},
      MX_REAL("attack.filter_threshold", attack.filter_threshold),
      MX_BOOL("attack.oracle_lambda", attack.oracle_lambda),
      MX_BOOL("attack.avg", attack.run_avg),
      MX_BOOL("attack.ca", attack.run_ca),
      MX_BOOL("attack.ca_cn", attack.run_ca_cn),
      MX_SIZE("attack.ca_iterations", attack.ca_iterations),
      MX_REAL("attack.ca_step", attack.ca_step),
      MX_BOOL("attack.write_images", attack.write_images),

      MX_PATH("paths.data", paths.data),
      MX_PATH("paths.checkpoints", paths.checkpoints),
      MX_PATH("paths.output", paths.output),
  };
  return table;
}

#undef MX_SIZE
#undef MX_REAL
#undef MX_BOOL
#undef MX_PATH

}  // namespace

FilterMode parse_filter_mode(std::string_view name) {
  if (name == "none") return FilterMode::none;
  if (name == "oracle") return FilterMode::oracle;
  if (name == "model") return FilterMode::model;
  throw ParameterError("unknown filter mode '" + std::string(name) + "' (expected none, oracle or model)");
}

const char* to_string(FilterMode mode) {
  switch (mode) {
    case FilterMode::none: return "none";
    case FilterMode::oracle: return "oracle";
    case FilterMode::model: return "model";
  }
  return "none";
}

ConfigEntries parse_config(std::istream& in) {
  ConfigEntries out;
  std::string section, line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no);
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) throw FormatError(where + ": malformed section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw FormatError(where + ": expected key = value");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    if (key.empty()) throw FormatError(where + ": empty key");
    if (section.empty()) throw FormatError(where + ": key '" + key + "' outside any section");
    const std::string full = section + "." + key;
    if (out.count(full)) throw FormatError(where + ": duplicate key " + full);
    out[full] = trim(std::string_view(text).substr(eq + 1));
  }
  return out;
}

ConfigEntries load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path.string());
  return parse_config(in);
}

ExperimentConfig make_config(const ConfigEntries& entries) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : entries) {
    const auto& table = bindings();
    auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) { return key == b.key; });
    if (it == table.end()) throw ParameterError("unknown config key " + key);
    it->set(cfg, key, value);
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return make_config(load_config_file(path)); }

void validate(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  if (d.image_size < 16) throw ParameterError("data.image_size must be at least 16");
  if (d.mix_count < 2) throw ParameterError("data.mix_count must be at least 2");
  if (d.targets < 2) throw ParameterError("data.targets must be at least 2");
  if (d.copies && *d.copies < 1) throw ParameterError("data.copies must be at least 1");
  if (d.cluster_size && *d.cluster_size < 2) throw ParameterError("data.cluster_size must be at least 2");
  if (!(d.epsilon >= 0.0 && d.epsilon <= 1.0)) throw ParameterError("data.epsilon must lie in [0, 1]");
  if (d.num_classes < 1) throw ParameterError("data.num_classes must be positive");
  if (d.zero_noise && d.mix_count != 2) throw ParameterError("data.zero_noise requires data.mix_count = 2");
  if (!d.zero_noise && d.public_pool < d.mix_count - 2) {
    throw ParameterError("data.public_pool must hold at least mix_count - 2 images");
  }
  if (cfg.fdn.train.epochs == 0) throw ParameterError("fdn.epochs must be positive");
  if (!(cfg.fdn.train.learning_rate > 0.0)) throw ParameterError("fdn.learning_rate must be positive");
  if (!(cfg.fdn.train.lambda_mssim >= 0.0 && cfg.fdn.train.lambda_mssim <= 1.0)) {
    throw ParameterError("fdn.lambda_mssim must lie in [0, 1]");
  }
  if (!(cfg.attack.filter_threshold > 0.0)) throw ParameterError("attack.filter_threshold must be positive");
  if (!(cfg.attack.ca_step > 0.0)) throw ParameterError("attack.ca_step must be positive");
}

std::string to_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& b : bindings()) {
    const std::string key = b.key;
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << b.get(cfg) << '\n';
  }
  return os.str();
}

void set_root(ExperimentConfig& cfg, const std::filesystem::path& root) {
  cfg.paths.data = root / "data";
  cfg.paths.checkpoints = root / "checkpoints";
  cfg.paths.output = root / "output";
}

}  // namespace mixcrypt::harness
