// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mixcrypt/errors.hpp"
#include "mixcrypt/harness/config.hpp"
#include "mixcrypt/harness/pipeline.hpp"
#include "mixcrypt/harness/report.hpp"

using namespace mixcrypt;
using namespace mixcrypt::harness;
namespace fs = std::filesystem;

namespace {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("mixcrypt_test_" + name + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ExperimentConfig tiny_config(const fs::path& root) {
  ExperimentConfig cfg;
  cfg.data.image_size = 16;
  cfg.data.public_pool = 8;
  cfg.data.train_targets = 4;
  cfg.data.targets = 3;
  cfg.data.cluster_size = 4;
  cfg.data.mix_count = 4;
  cfg.data.epsilon = 0.1;
  cfg.fdn.train.epochs = 1;
  cfg.attack.oracle_clusters = true;
  cfg.attack.ca_iterations = 20;
  cfg.attack.write_images = false;
  set_root(cfg, root);
  return cfg;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ConfigEntries parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
  auto e = parse("# header\n[data]\ntargets = 8  # trailing\n\nepsilon=0.3\n[fdn]\nloss = l1\n");
  EXPECT_EQ(e.size(), 3u);
  EXPECT_EQ(e.at("data.targets"), "8");
  EXPECT_EQ(e.at("data.epsilon"), "0.3");
  auto cfg = make_config(e);
  EXPECT_EQ(cfg.data.targets, 8u);
  EXPECT_DOUBLE_EQ(cfg.data.epsilon, 0.3);
  EXPECT_EQ(cfg.fdn.train.loss, metrics::LossKind::l1);
}

TEST(Config, RejectsMalformedText) {
  EXPECT_THROW(parse("targets = 3\n"), FormatError);
  EXPECT_THROW(parse("[data]\ntargets = 3\ntargets = 4\n"), FormatError);
  EXPECT_THROW(parse("[data]\njust words\n"), FormatError);
}

TEST(Config, UnknownKeysAndBadValues) {
  EXPECT_THROW(make_config({{"data.target", "3"}}), ParameterError);
  EXPECT_THROW(make_config({{"data.targets", "three"}}), ParameterError);
  EXPECT_THROW(make_config({{"attack.filter", "sometimes"}}), ParameterError);
  EXPECT_THROW(make_config({{"data.zero_noise", "true"}}), ParameterError);  // k = 6
  EXPECT_NO_THROW(make_config({{"data.zero_noise", "true"}, {"data.mix_count", "2"}}));
}

TEST(Config, TextRoundTrip) {
  auto cfg = make_config({{"experiment.seed", "42"},
                          {"data.epsilon", "0.15"},
                          {"data.cluster_size", "none"},
                          {"fdn.fusion", "average"},
                          {"fdn.lambda_mssim", "0.3"},
                          {"attack.filter", "oracle"},
                          {"paths.output", "elsewhere/out"}});
  const auto text = to_text(cfg);
  std::istringstream in(text);
  auto again = make_config(parse_config(in));
  EXPECT_EQ(to_text(again), text);
  EXPECT_EQ(again.seed, 42u);
  EXPECT_FALSE(again.data.cluster_size.has_value());
  EXPECT_EQ(again.attack.filter, FilterMode::oracle);
  EXPECT_EQ(again.paths.output, fs::path("elsewhere/out"));
}

TEST(Config, CopiesFollowClusterSizeUnlessSet) {
  EXPECT_EQ(make_config({{"data.cluster_size", "7"}}).data.resolved_copies(), 7u);
  EXPECT_EQ(make_config({{"data.cluster_size", "none"}}).data.resolved_copies(), 1u);
  EXPECT_EQ(make_config({{"data.cluster_size", "7"}, {"data.copies", "2"}}).data.resolved_copies(), 2u);
  EXPECT_NE(to_text(make_config({})).find("copies = auto"), std::string::npos);
  EXPECT_THROW(make_config({{"data.copies", "0"}}), ParameterError);
}

TEST(Report, SortedOutputAndRoundTrip) {
  AttackReport r;
  r.rows = {{2, "FDN", 10, 0.2, 6, 0.5}, {0, "CA", 10, 0.2, 6, 0.125}, {0, "AVG", 10, 0.2, 6, -0.25}};
  std::ostringstream os;
  write_report(os, r);
  EXPECT_EQ(os.str(),
            "target_id,method,m_used,epsilon,k,ssim\n"
            "0,AVG,10,0.2,6,-0.25\n"
            "0,CA,10,0.2,6,0.125\n"
            "2,FDN,10,0.2,6,0.5\n");
  std::istringstream in(os.str());
  auto back = read_report(in);
  r.sort();
  EXPECT_EQ(back.rows, r.rows);
  EXPECT_DOUBLE_EQ(back.mean("AVG"), -0.25);
  EXPECT_THROW(back.mean("CA-CN"), DataError);
}

TEST(Report, EmptyReportIsHeaderOnly) {
  std::ostringstream os;
  write_report(os, {});
  EXPECT_EQ(os.str(), std::string(kReportHeader) + "\n");
}

TEST(Report, RejectsBadInput) {
  std::istringstream wrong_header("id,method\n");
  EXPECT_THROW(read_report(wrong_header), FormatError);
  std::istringstream out_of_range(std::string(kReportHeader) + "\n0,FDN,4,0.1,6,1.5\n");
  EXPECT_THROW(read_report(out_of_range), FormatError);
  std::istringstream short_row(std::string(kReportHeader) + "\n0,FDN,4\n");
  EXPECT_THROW(read_report(short_row), FormatError);
}

TEST(Pipeline, GenDataExampleDigestIsStable) {
  ScratchDir a("gen_a"), b("gen_b");
  auto make = [](const fs::path& root) {
    auto cfg = make_config({{"experiment.seed", "7"},
                            {"data.targets", "8"},
                            {"data.copies", "1"},
                            {"data.cluster_size", "8"},
                            {"data.epsilon", "0.1"},
                            {"data.mix_count", "6"},
                            {"data.train_targets", "0"}});
    set_root(cfg, root);
    return cfg;
  };
  const auto first = gen_data(make(a.path()));
  const auto second = gen_data(make(b.path()));
  EXPECT_EQ(first.test_encryptions, 64u);
  EXPECT_EQ(first.digest, second.digest);
  EXPECT_EQ(first.digest, "d07e8c1dfe87ea66");  // regression pin
  EXPECT_EQ(read_file(test_data_path(make(a.path()))), read_file(test_data_path(make(b.path()))));

  auto other = make(b.path());
  other.seed = 8;
  EXPECT_NE(gen_data(other).digest, first.digest);
}

TEST(Pipeline, MissingArtifactNamesProducingStage) {
  ScratchDir dir("missing");
  auto cfg = tiny_config(dir.path());
  try {
    attack_stage(cfg);
    FAIL() << "expected MissingArtifactError";
  } catch (const MissingArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("gen-data"), std::string::npos) << e.what();
  }
  gen_data(cfg);
  try {
    attack_stage(cfg);
    FAIL() << "expected MissingArtifactError";
  } catch (const MissingArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("train-fdn"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, ZeroNoiseOracleClustersAverageRecoversTargets) {
  ScratchDir dir("zero_noise");
  auto cfg = make_config({{"data.zero_noise", "true"},
                          {"data.mix_count", "2"},
                          {"data.epsilon", "0"},
                          {"data.targets", "4"},
                          {"data.cluster_size", "8"},
                          {"data.train_targets", "0"},
                          {"attack.oracle_clusters", "true"},
                          {"attack.write_images", "false"}});
  set_root(cfg, dir.path());
  gen_data(cfg);
  auto report = attack_stage(cfg, {.fdn = false, .baselines = true});
  EXPECT_GT(report.mean("AVG"), 0.99);
  EXPECT_EQ(read_file(report_path(cfg)).substr(0, std::string(kReportHeader).size()), kReportHeader);
}

TEST(Pipeline, AttackIsDeterministicAcrossRoots) {
  ScratchDir a("det_a"), b("det_b");
  std::string report[2], checkpoint[2];
  int i = 0;
  for (const auto* dir : {&a, &b}) {
    auto cfg = tiny_config(dir->path());
    gen_data(cfg);
    train_fdn_stage(cfg);
    attack_stage(cfg);
    report[i] = read_file(report_path(cfg));
    checkpoint[i] = read_file(fdn_checkpoint_path(cfg));
    ++i;
  }
  EXPECT_FALSE(report[0].empty());
  EXPECT_EQ(report[0], report[1]);
  EXPECT_EQ(checkpoint[0], checkpoint[1]);
}

TEST(Pipeline, SweepProducesOneCellPerCombination) {
  ScratchDir dir("sweep");
  auto cfg = tiny_config(dir.path());
  cfg.attack.run_ca = false;
  cfg.attack.run_ca_cn = false;
  auto cells = sweep_stage(cfg, {{2, 4}, {0.1, 0.4}, {}});
  ASSERT_EQ(cells.size(), 4u);
  for (const auto& c : cells) {
    EXPECT_TRUE(c.means.count("FDN")) << c.root;
    EXPECT_TRUE(fs::exists(c.root / "config.ini"));
  }
  const auto csv = read_file(cfg.paths.output / "sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSweepHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2);
}
