#include <gtest/gtest.h>

#include <algorithm>

#include "fusionkit/config.hpp"
#include "fusionkit/grid.hpp"

using namespace fusionkit;

namespace {

RunResult fake(const std::string& combo, InterfaceKind k, double value, std::size_t params,
               const std::string& metric = "accuracy") {
  RunResult r;
  r.combo = combo;
  r.n_models = std::count(combo.begin(), combo.end(), '+') + 1;
  r.interface_kind = k;
  r.param_count = params;
  for (const char* s : {"train", "dev", "test"})
    r.reports.push_back({std::string("classify/") + s, metric, value, 10, 0});
  return r;
}

}  // namespace

TEST(Grid, AggregateAveragesSeedsAndSorts) {
  const std::vector<RunResult> runs{fake("A+B", InterfaceKind::ws, 0.9, 30), fake("A", InterfaceKind::ws, 0.6, 13),
                                    fake("A", InterfaceKind::ws, 0.8, 13), fake("B", InterfaceKind::ws, 0.5, 13)};
  const auto rows = aggregate(runs);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].combo, "A");
  EXPECT_EQ(rows[0].n_seeds, 2u);
  EXPECT_DOUBLE_EQ(rows[0].mean, 0.7);
  EXPECT_EQ(rows[2].combo, "A+B");
  EXPECT_EQ(rows[2].param_count, 30u);
}

TEST(Grid, GainAgainstBestSingle) {
  auto rows = aggregate({fake("A", InterfaceKind::ws, 0.6, 1), fake("B", InterfaceKind::ws, 0.75, 1),
                         fake("A+B", InterfaceKind::ws, 0.9, 1)});
  auto gains = fusion_gain(rows);
  ASSERT_EQ(gains.size(), 1u);
  EXPECT_EQ(gains[0].best_single, "B");
  EXPECT_NEAR(gains[0].gain_percent, 20.0, 1e-9);

  rows = aggregate({fake("A", InterfaceKind::ws, 0.2, 1, "cer"), fake("B", InterfaceKind::ws, 0.4, 1, "cer"),
                    fake("A+B", InterfaceKind::ws, 0.15, 1, "cer")});
  gains = fusion_gain(rows);
  EXPECT_EQ(gains[0].best_single, "A");
  EXPECT_NEAR(gains[0].gain_percent, 25.0, 1e-9);

  EXPECT_THROW(fusion_gain(aggregate({fake("A+B", InterfaceKind::ws, 0.9, 1)})), std::invalid_argument);
}

TEST(Grid, MarkdownAndCsvContainParamCounts) {
  const auto rows = aggregate({fake("A", InterfaceKind::hconv, 0.6, 1234), fake("A+B", InterfaceKind::hconv, 0.8, 4321),
                               fake("B", InterfaceKind::hconv, 0.7, 1234)});
  const auto md = render_markdown(rows, fusion_gain(rows));
  EXPECT_NE(md.find("## Single Model"), std::string::npos);
  EXPECT_NE(md.find("## 2 Model Fusion"), std::string::npos);
  EXPECT_NE(md.find("## Fusion Gain"), std::string::npos);
  EXPECT_NE(md.find("| A+B | hconv | 4321 | 1 | **<u>0.8000</u>** |"), std::string::npos);
  EXPECT_NE(md.find("| B | hconv | 1234 | 1 | <u>0.7000</u> |"), std::string::npos);
  const auto csv = render_csv(rows);
  EXPECT_NE(csv.find("A+B,2,hconv,accuracy,0.8,1,4321"), std::string::npos);
  EXPECT_EQ(render_markdown({}, {}), "");
}

TEST(Grid, ParallelRunMatchesSerial) {
  const auto file = load_config(std::string(FUSIONKIT_TEST_DATA) + "/grid_small.cfg");
  GridSpec g = *file.grid;
  g.interfaces = {InterfaceKind::ws, InterfaceKind::hconv};
  auto configs = expand_grid(file.experiment, g);
  for (auto& c : configs) c.train.steps = 8;
  std::size_t calls = 0;
  const auto serial = run_grid(configs, 1, [&](std::size_t, std::size_t total, const RunResult&) {
    ++calls;
    EXPECT_EQ(total, 6u);
  });
  EXPECT_EQ(calls, 6u);
  const auto parallel = run_grid(configs, 3);
  EXPECT_EQ(serial.markdown, parallel.markdown);
  EXPECT_EQ(serial.csv, parallel.csv);
  EXPECT_EQ(serial.rows.size(), 6u);
  EXPECT_EQ(serial.gains.size(), 2u);
  for (std::size_t i = 0; i < configs.size(); ++i)
    EXPECT_EQ(encode_checkpoint(serial.runs[i].checkpoint), encode_checkpoint(parallel.runs[i].checkpoint));
}
