#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fusionkit/oracles/oracles.hpp"
#include "fusionkit/oracles/suites.hpp"

using namespace fusionkit;

TEST(Oracles, CtcBruteForceHandExample) {
  const std::vector<double> lp{std::log(0.4), std::log(0.6), std::log(0.7), std::log(0.3)};
  EXPECT_NEAR(oracles::ctc_bruteforce(lp, 2, 2, std::vector<int>{1}), -std::log(0.72), 1e-14);
}

TEST(Oracles, EditTableHandExample) {
  EXPECT_EQ(oracles::edit_distance_table(std::vector<int>{1, 2, 3, 4}, std::vector<int>{2, 3, 5}), 2u);
}

TEST(Oracles, EerSweepSeparable) {
  EXPECT_EQ(oracles::eer_sweep(std::vector<double>{2, 3}, std::vector<double>{0, 1}), 0.0);
}

TEST(Oracles, ResampleScalarEndpoints) {
  const auto y = oracles::resample_scalar(std::vector<double>{1, 3}, 3);
  EXPECT_EQ(y, (std::vector<double>{1, 2, 3}));
}

TEST(Oracles, MatmulNaive) {
  EXPECT_EQ(oracles::matmul_naive(std::vector<double>{1, 2}, std::vector<double>{3, 4}, 1, 2, 1),
            std::vector<double>{11});
}

TEST(Suites, SmallRunsPass) {
  oracles::GradSuiteOptions g;
  g.seeds = 1;
  g.layers = 5;
  g.dim = 4;
  g.frames = 4;
  g.n_models = {1, 2};
  for (const auto& r : {oracles::run_grad_suite(g), oracles::run_ctc_suite(20, 1), oracles::run_interp_suite(100, 1),
                        oracles::run_eer_suite(100, 1), oracles::run_edit_suite(500, 1), oracles::run_format_suite()}) {
    EXPECT_TRUE(r.passed) << r.name << ": " << (r.failures.empty() ? "" : r.failures.front());
    EXPECT_GT(r.cases, 0u) << r.name;
    EXPECT_LE(r.worst, r.tolerance) << r.name;
  }
}

TEST(Suites, ObserveFailsAboveTolerance) {
  oracles::SuiteResult r;
  r.tolerance = 1e-6;
  r.observe(1e-7, "fine");
  EXPECT_TRUE(r.passed);
  r.observe(1e-3, "bad");
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_case, "bad");
}

TEST(Suites, FormatSuiteRejectsCorruptFixture) {
  const auto path = std::filesystem::temp_directory_path() / "fusionkit_corrupt.hsb";
  {
    std::ofstream os(path, std::ios::binary);
    os << "HSB1garbage";
  }
  EXPECT_FALSE(oracles::run_format_suite(path).passed);
  std::filesystem::remove(path);
}
