#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fusionkit/bundle.hpp"
#include "fusionkit/config.hpp"
#include "fusionkit/trainer.hpp"

using namespace fusionkit;
namespace fs = std::filesystem;

namespace {

const fs::path kData = FUSIONKIT_TEST_DATA;

struct Outcome {
  int code;
  std::string output;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("fusionkit_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args, const std::string& env = "") const {
    const fs::path log = dir_ / "cli.log";
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + FUSIONKIT_CLI + "' " + args + " > '" +
                            log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
  }

  fs::path write_bundle_for(const ExperimentConfig& cfg, std::size_t encoder, std::size_t input_len,
                            const std::string& name) const {
    const auto resolved = resolve(cfg);
    const auto encoders = make_encoders(resolved);
    const auto data = make_dataset(resolved);
    const Tensor x = slice_input(data.items[0].input, input_len);
    const fs::path p = dir_ / name;
    write_bundle(encoders[encoder].encode(x), p);
    return p;
  }

  static Tensor slice_input(const Tensor& x, std::size_t rows) {
    std::vector<double> v(x.data().begin(), x.data().begin() + rows * x.dim(1));
    return Tensor::from({rows, x.dim(1)}, v);
  }

  fs::path dir_;
};

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_F(Cli, TrainWritesReport) {
  const auto r = run("train --config " + q(kData / "classify_small.cfg") + " --out " + q(dir_ / "out"));
  ASSERT_EQ(r.code, 0) << r.output;
  bool found = false;
  for (const auto& e : fs::recursive_directory_iterator(dir_ / "out"))
    found = found || e.path().filename() == "report.csv";
  EXPECT_TRUE(found);
  EXPECT_NE(r.output.find("accuracy"), std::string::npos);
}

TEST_F(Cli, MisspelledKeyIsUsageError) {
  const auto r = run("train --config " + q(kData / "misspelled.cfg") + " --out " + q(dir_ / "out"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("batch_sise"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("line 27"), std::string::npos) << r.output;
}

TEST_F(Cli, NanLossExitsThree) {
  const auto r = run("train --config " + q(kData / "nan.cfg") + " --out " + q(dir_ / "out"));
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST_F(Cli, SeedFromEnvironmentAndFlag) {
  auto r = run("train --config " + q(kData / "classify_small.cfg") + " --out " + q(dir_ / "env"), "FUSIONKIT_SEED=7");
  ASSERT_EQ(r.code, 0) << r.output;
  auto cfg = load_config(kData / "classify_small.cfg").experiment;
  cfg.train.seed = 7;
  EXPECT_TRUE(fs::exists(dir_ / "env" / config_digest(resolve(cfg)) / "report.csv"));
  r = run("train --seed 9 --config " + q(kData / "classify_small.cfg") + " --out " + q(dir_ / "flag"),
          "FUSIONKIT_SEED=7");
  ASSERT_EQ(r.code, 0) << r.output;
  cfg.train.seed = 9;
  EXPECT_TRUE(fs::exists(dir_ / "flag" / config_digest(resolve(cfg)) / "report.csv"));
}

TEST_F(Cli, GridIsTwelveRowsAndReproducible) {
  auto a = run("grid --config " + q(kData / "grid_small.cfg") + " --out " + q(dir_ / "a"));
  ASSERT_EQ(a.code, 0) << a.output;
  const std::string md = slurp(dir_ / "a" / "grid.md");
  std::istringstream table(md.substr(0, md.find("## Fusion Gain")));
  std::size_t rows = 0;
  for (std::string line; std::getline(table, line);)
    if (line.rfind("| A", 0) == 0 || line.rfind("| B", 0) == 0) ++rows;
  EXPECT_EQ(rows, 12u) << md;
  EXPECT_NE(md.find("## Fusion Gain"), std::string::npos);
  const std::string csv = slurp(dir_ / "a" / "grid.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
  auto b = run("grid --jobs 1 --config " + q(kData / "grid_small.cfg") + " --out " + q(dir_ / "b"));
  ASSERT_EQ(b.code, 0) << b.output;
  EXPECT_EQ(slurp(dir_ / "b" / "grid.md"), md);
  EXPECT_EQ(slurp(dir_ / "b" / "grid.csv"), csv);
}

TEST_F(Cli, EmptyGridIsUsageError) {
  const auto r = run("grid --config " + q(kData / "grid_empty.cfg") + " --out " + q(dir_ / "out"));
  EXPECT_EQ(r.code, 2) << r.output;
}

TEST_F(Cli, ExportFeatures) {
  const auto cfg = load_config(kData / "classify_small.cfg").experiment;
  ASSERT_EQ(run("train --config " + q(kData / "classify_small.cfg") + " --out " + q(dir_ / "out")).code, 0);
  const fs::path ckpt = dir_ / "out" / config_digest(resolve(cfg)) / "checkpoint.ifc";
  ASSERT_TRUE(fs::exists(ckpt));
  const auto a = write_bundle_for(cfg, 0, 80, "a.hsb");
  const auto b = write_bundle_for(cfg, 1, 60, "b.hsb");
  const std::string args = "export-features --checkpoint " + q(ckpt) + " --bundles " + q(a) + " " + q(b) + " --out ";
  auto r = run(args + q(dir_ / "f1.hsb"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto fused = read_bundle(dir_ / "f1.hsb");
  EXPECT_EQ(fused.layers(), 1u);
  EXPECT_EQ(fused.frames(), read_bundle(a).frames());
  EXPECT_GT(read_bundle(a).frames(), read_bundle(b).frames());
  EXPECT_EQ(fused.dim(), 8u);
  ASSERT_EQ(run(args + q(dir_ / "f2.hsb")).code, 0);
  EXPECT_EQ(slurp(dir_ / "f1.hsb"), slurp(dir_ / "f2.hsb"));

  auto narrow = cfg;
  narrow.encoders[1].dim = 6;
  const auto c = write_bundle_for(narrow, 1, 80, "c.hsb");
  r = run("export-features --checkpoint " + q(ckpt) + " --bundles " + q(a) + " " + q(c) + " --out " +
          q(dir_ / "f3.hsb"));
  EXPECT_EQ(r.code, 2) << r.output;
  r = run("export-features --checkpoint " + q(ckpt) + " --bundles " + q(a) + " --out " + q(dir_ / "f4.hsb"));
  EXPECT_EQ(r.code, 2) << r.output;
}

TEST_F(Cli, VerifySuites) {
  auto r = run("verify --suite ctc");
  EXPECT_EQ(r.code, 0) << r.output;
  r = run("verify --suite interp --seed 3");
  EXPECT_EQ(r.code, 0) << r.output;
  r = run("verify --suite nonsense");
  EXPECT_EQ(r.code, 2) << r.output;

  const auto cfg = load_config(kData / "classify_small.cfg").experiment;
  const auto good = write_bundle_for(cfg, 0, 80, "good.hsb");
  r = run("verify --suite format --fixture " + q(good));
  EXPECT_EQ(r.code, 0) << r.output;
  std::string bytes = slurp(good);
  bytes.resize(bytes.size() - 7);
  {
    std::ofstream os(dir_ / "bad.hsb", std::ios::binary);
    os << bytes;
  }
  r = run("verify --suite format --fixture " + q(dir_ / "bad.hsb"));
  EXPECT_EQ(r.code, 1) << r.output;
  EXPECT_NE(r.output.find("truncated"), std::string::npos) << r.output;
}

TEST_F(Cli, InspectBundle) {
  const auto cfg = load_config(kData / "classify_small.cfg").experiment;
  const auto p = write_bundle_for(cfg, 0, 80, "x.hsb");
  auto r = run("inspect-bundle " + q(p));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("layers       5"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("model_id     A"), std::string::npos) << r.output;
  r = run("inspect-bundle " + q(dir_ / "missing.hsb"));
  EXPECT_EQ(r.code, 1);
}
