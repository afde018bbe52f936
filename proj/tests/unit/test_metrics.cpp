#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fusionkit/metrics.hpp"
#include "fusionkit/oracles/oracles.hpp"
#include "fusionkit/random.hpp"

using namespace fusionkit;

TEST(Metrics, EditDistanceExamples) {
  using V = std::vector<int>;
  EXPECT_EQ(edit_distance(V{}, V{}), 0u);
  EXPECT_EQ(edit_distance(V{1, 2, 3}, V{}), 3u);
  EXPECT_EQ(edit_distance(V{}, V{4, 4}), 2u);
  EXPECT_EQ(edit_distance(V{1, 2, 3}, V{1, 3}), 1u);
  EXPECT_EQ(edit_distance(V{1, 2, 3, 4}, V{2, 1, 3, 5}), 3u);
}

TEST(Metrics, EditDistanceProperties) {
  Rng rng(5);
  auto draw = [&] {
    std::vector<int> v(rng.below(8));
    for (auto& x : v) x = static_cast<int>(rng.below(4));
    return v;
  };
  for (int i = 0; i < 500; ++i) {
    const auto a = draw(), b = draw(), c = draw();
    const auto ab = edit_distance(a, b);
    EXPECT_EQ(ab, oracles::edit_distance_table(a, b));
    EXPECT_EQ(ab, edit_distance(b, a));
    EXPECT_LE(edit_distance(a, c), ab + edit_distance(b, c));
    EXPECT_LE(ab, std::max(a.size(), b.size()));
    EXPECT_EQ(edit_distance(a, a), 0u);
  }
}

TEST(Metrics, CerIsCorpusLevel) {
  const std::vector<std::vector<int>> hyps{{1, 2}, {}}, refs{{1, 2, 3}, {4}};
  EXPECT_DOUBLE_EQ(cer(hyps, refs), 2.0 / 4.0);
  EXPECT_THROW(cer({{1}}, refs), std::invalid_argument);
  EXPECT_THROW(cer({{}}, {{}}), std::invalid_argument);
}

TEST(Metrics, Accuracy) {
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1, 0, 1, 1}, std::vector<int>{1, 1, 1, 0}), 0.5);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
}

TEST(Metrics, EerExamples) {
  EXPECT_EQ(eer(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}), 0.0);
  EXPECT_EQ(eer(std::vector<double>{0.1, 0.2}, std::vector<double>{0.8, 0.9}), 1.0);
  EXPECT_NEAR(eer(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}), 0.5, 1e-12);
  EXPECT_THROW(eer(std::vector<double>{}, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Metrics, EerMatchesSweepOracle) {
  Rng rng(6);
  for (int c = 0; c < 200; ++c) {
    std::vector<double> pos(1 + rng.below(20)), neg(1 + rng.below(20));
    for (auto& x : pos) x = std::round(rng.normal() * 4 + 2) / 4;
    for (auto& x : neg) x = std::round(rng.normal() * 4) / 4;
    const double e = eer(pos, neg);
    EXPECT_NEAR(e, oracles::eer_sweep(pos, neg), 1e-12);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0);
  }
}

TEST(Metrics, ReportCsv) {
  const EvalReport r{"ctc", "cer", 0.125, 12, 3};
  std::ostringstream os;
  write_reports_csv(os, std::vector<EvalReport>{r});
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), kReportCsvHeader);
  EXPECT_NE(os.str().find("ctc,cer,0.125"), std::string::npos);
  EXPECT_TRUE(lower_is_better("cer"));
  EXPECT_TRUE(lower_is_better("eer"));
  EXPECT_FALSE(lower_is_better("accuracy"));
}
