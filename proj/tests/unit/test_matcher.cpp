#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fusionkit/matcher.hpp"
#include "fusionkit/oracles/oracles.hpp"
#include "fusionkit/random.hpp"

using namespace fusionkit;

namespace {

HiddenStateBundle bundle(std::size_t L, std::size_t T, std::size_t D, std::uint64_t seed, std::uint32_t fr = 50) {
  Rng rng(seed);
  std::vector<double> v(L * T * D);
  for (auto& x : v) x = rng.normal();
  return HiddenStateBundle("m" + std::to_string(seed), fr, Tensor::from({L, T, D}, v));
}

}  // namespace

TEST(Matcher, ResampleExample) {
  const Tensor x = Tensor::from({3}, {0.0, 1.0, 4.0});
  const Tensor y = resample_linear(x, 0, 5);
  const std::vector<double> want{0.0, 0.5, 1.0, 2.5, 4.0};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(y.data()[i], want[i]);
}

TEST(Matcher, EqualLengthIsIdentity) {
  const Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(resample_linear(x, 1, 3).node_ptr(), x.node_ptr());
}

TEST(Matcher, LengthOneBroadcasts) {
  const Tensor y = resample_linear(Tensor::from({1, 2}, {3.0, -1.0}), 0, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(y.at({i, 0}), 3.0);
    EXPECT_EQ(y.at({i, 1}), -1.0);
  }
}

TEST(Matcher, RejectsDownsamplingAndBadAxis) {
  const Tensor x = Tensor::zeros({4, 2});
  EXPECT_THROW(resample_linear(x, 0, 3), std::invalid_argument);
  EXPECT_THROW(resample_linear(x, 2, 5), ShapeError);
}

TEST(Matcher, ResampleMatchesScalarOraclePerColumn) {
  Rng rng(11);
  for (int c = 0; c < 50; ++c) {
    const std::size_t len = 1 + rng.below(9), extra = rng.below(20), inner = 1 + rng.below(3);
    std::vector<double> v(len * inner);
    for (auto& e : v) e = rng.normal();
    const Tensor y = resample_linear(Tensor::from({len, inner}, v), 0, len + extra);
    for (std::size_t i = 0; i < inner; ++i) {
      std::vector<double> col(len);
      for (std::size_t j = 0; j < len; ++j) col[j] = v[j * inner + i];
      const auto want = oracles::resample_scalar(col, len + extra);
      for (std::size_t j = 0; j < len + extra; ++j) EXPECT_NEAR(y.at({j, i}), want[j], 1e-12);
    }
  }
}

// Property: endpoints are preserved and every output lies within its source
// neighbours' range.
TEST(Matcher, ResampleEndpointsAndBounds) {
  Rng rng(12);
  for (int c = 0; c < 100; ++c) {
    const std::size_t len = 2 + rng.below(10), n = len + rng.below(30);
    std::vector<double> v(len);
    for (auto& e : v) e = rng.normal();
    const Tensor y = resample_linear(Tensor::from({len}, v), 0, n);
    EXPECT_EQ(y.data().front(), v.front());
    EXPECT_EQ(y.data().back(), v.back());
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    for (double e : y.data()) {
      EXPECT_GE(e, *lo - 1e-12);
      EXPECT_LE(e, *hi + 1e-12);
    }
  }
}

TEST(Matcher, MaxOfInputsTarget) {
  const std::vector<HiddenStateBundle> in{bundle(13, 10, 4, 1), bundle(25, 20, 4, 2, 100)};
  const auto out = match_bundles(in, {});
  for (const auto& b : out) {
    EXPECT_EQ(b.layers(), 25u);
    EXPECT_EQ(b.frames(), 20u);
    EXPECT_EQ(b.framerate_hz, 100u);
  }
  EXPECT_EQ(out[1].data.node_ptr(), in[1].data.node_ptr());
}

TEST(Matcher, DimRules) {
  const std::vector<HiddenStateBundle> in{bundle(3, 4, 4, 1), bundle(3, 4, 6, 2)};
  EXPECT_THROW(match_bundles(in, {}), std::invalid_argument);
  MatchPolicy p;
  p.dim_rule = DimRule::interpolate_to_max;
  for (const auto& b : match_bundles(in, p)) EXPECT_EQ(b.dim(), 6u);
  EXPECT_EQ(parse_dim_rule("interpolate_to_max"), DimRule::interpolate_to_max);
  EXPECT_THROW(parse_dim_rule("nearest"), std::invalid_argument);
}

TEST(Matcher, ExplicitTarget) {
  const std::vector<HiddenStateBundle> in{bundle(3, 4, 2, 1)};
  MatchPolicy p;
  p.target_rule = TargetRule::explicit_size;
  p.layers = 5;
  p.frames = 8;
  const auto out = match_bundles(in, p);
  EXPECT_EQ(out[0].data.shape(), (Shape{5, 8, 2}));
  EXPECT_EQ(out[0].framerate_hz, 100u);
  p.frames = 3;
  EXPECT_THROW(match_bundles(in, p), std::invalid_argument);
  EXPECT_THROW(match_bundles(std::span<const HiddenStateBundle>{}, {}), std::invalid_argument);
}

TEST(Matcher, Merges) {
  const std::vector<HiddenStateBundle> in{bundle(2, 3, 2, 1), bundle(2, 3, 2, 2)};
  const auto add = merge_add(in);
  const auto cat = merge_concat(in);
  EXPECT_EQ(add.data.shape(), (Shape{2, 3, 2}));
  EXPECT_EQ(cat.data.shape(), (Shape{2, 3, 4}));
  EXPECT_EQ(cat.n_models, 2u);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t d = 0; d < 2; ++d) {
        EXPECT_DOUBLE_EQ(add.data.at({l, t, d}), in[0].data.at({l, t, d}) + in[1].data.at({l, t, d}));
        EXPECT_EQ(cat.data.at({l, t, d}), in[0].data.at({l, t, d}));
        EXPECT_EQ(cat.data.at({l, t, d + 2}), in[1].data.at({l, t, d}));
      }
  const std::vector<HiddenStateBundle> bad{bundle(2, 3, 2, 1), bundle(2, 4, 2, 2)};
  EXPECT_THROW(merge_add(bad), ShapeError);
  EXPECT_THROW(merge_concat(bad), ShapeError);
}
