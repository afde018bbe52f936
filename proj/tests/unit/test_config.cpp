#include <gtest/gtest.h>

#include <string>

#include "fusionkit/config.hpp"

using namespace fusionkit;

namespace {

const std::filesystem::path kData = FUSIONKIT_TEST_DATA;

std::size_t error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no ConfigError for:\n" << text;
  return 0;
}

const char* kMinimal = R"(
[encoder.0]
model_id = X
[task]
kind = classify
)";

}  // namespace

TEST(Config, LoadsFixture) {
  const auto cfg = load_config(kData / "classify_small.cfg");
  const auto& e = cfg.experiment;
  ASSERT_EQ(e.encoders.size(), 2u);
  EXPECT_EQ(e.encoders[0].model_id, "A");
  EXPECT_EQ(e.encoders[1].specialization, Specialization::group_b);
  EXPECT_EQ(e.encoders[0].layers, 4u);
  EXPECT_EQ(e.interface.kind, InterfaceKind::ws);
  EXPECT_EQ(e.task.kind, TaskKind::classify);
  EXPECT_EQ(e.task.n_items, 200u);
  EXPECT_EQ(e.train.steps, 60u);
  EXPECT_DOUBLE_EQ(e.train.adam.lr, 0.005);
  EXPECT_EQ(e.train.seed, 3u);
  EXPECT_FALSE(cfg.grid.has_value());
}

TEST(Config, EmitParsesBackToTheSameConfig) {
  for (const char* name : {"classify_small.cfg", "ctc_small.cfg", "verify_small.cfg", "grid_small.cfg"}) {
    const auto cfg = load_config(kData / name);
    const auto text = emit_config(cfg);
    EXPECT_EQ(parse_config(text), cfg) << name;
    EXPECT_EQ(emit_config(parse_config(text)), text) << name;
  }
}

TEST(Config, DigestIsStableAndSensitive) {
  auto e = load_config(kData / "classify_small.cfg").experiment;
  const auto d = config_digest(e);
  EXPECT_EQ(d.size(), 16u);
  EXPECT_EQ(d, config_digest(load_config(kData / "classify_small.cfg").experiment));
  e.train.seed = 4;
  EXPECT_NE(config_digest(e), d);
}

TEST(Config, MisspelledKeyReportsNameAndLine) {
  try {
    load_config(kData / "misspelled.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 27u);
    EXPECT_NE(std::string(e.what()).find("batch_sise"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 27"), std::string::npos);
  }
}

TEST(Config, StrictParsing) {
  EXPECT_EQ(error_line(std::string(kMinimal) + "[train]\nsteps = ten\n"), 7u);
  EXPECT_EQ(error_line(std::string(kMinimal) + "[train]\nsteps = 1\nsteps = 2\n"), 8u);
  EXPECT_EQ(error_line(std::string(kMinimal) + "[decoder]\n"), 6u);
  EXPECT_EQ(error_line(std::string(kMinimal) + "steps\n"), 6u);
  EXPECT_EQ(error_line(std::string(kMinimal) + "[interface]\nkind = lstm\n"), 7u);
  EXPECT_NO_THROW(parse_config(std::string(kMinimal) + "# comment\n\n[train]\nsteps = 5  \n"));
}

TEST(Config, EmptyGridIsAnError) {
  EXPECT_THROW(load_config(kData / "grid_empty.cfg"), ConfigError);
}

TEST(Config, MissingFileIsAnError) {
  EXPECT_THROW(load_config(kData / "does_not_exist.cfg"), ConfigError);
}

TEST(Config, GridExpansionOrder) {
  const auto cfg = load_config(kData / "grid_small.cfg");
  ASSERT_TRUE(cfg.grid.has_value());
  GridSpec g = *cfg.grid;
  EXPECT_EQ(g.combos.size(), 3u);
  EXPECT_EQ(g.jobs, 2u);
  g.seeds = {1, 2};
  const auto runs = expand_grid(cfg.experiment, g);
  ASSERT_EQ(runs.size(), 3u * 4u * 2u);
  EXPECT_EQ(combo_name(runs[0]), "A");
  EXPECT_EQ(runs[0].interface.kind, InterfaceKind::ws);
  EXPECT_EQ(runs[0].train.seed, 1u);
  EXPECT_EQ(runs[1].train.seed, 2u);
  EXPECT_EQ(runs[2].interface.kind, InterfaceKind::gumd);
  EXPECT_EQ(combo_name(runs.back()), "A+B");
  EXPECT_EQ(runs.back().interface.kind, InterfaceKind::chconv);
  g.combos = {{"C"}};
  EXPECT_THROW(expand_grid(cfg.experiment, g), ConfigError);
}
