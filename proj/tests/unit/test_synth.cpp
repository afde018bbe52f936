#include <gtest/gtest.h>

#include <cmath>

#include "fusionkit/random.hpp"
#include "fusionkit/synth.hpp"

using namespace fusionkit;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST(Synth, FrameWindowsTileTheInput) {
  const auto w = frame_windows(100, 1000, 50);
  ASSERT_EQ(w.size(), 5u);
  EXPECT_EQ(w.front(), std::make_pair(std::size_t{0}, std::size_t{20}));
  for (std::size_t t = 1; t < w.size(); ++t) EXPECT_EQ(w[t].first, w[t - 1].second);
  EXPECT_EQ(frame_windows(19, 1000, 50).size(), 0u);
  EXPECT_THROW(frame_windows(10, 0, 50), std::invalid_argument);
}

TEST(Synth, EncoderShapeDeterminismAndFloat32) {
  EncoderSpec spec;
  spec.seed = 5;
  spec.layers = 4;
  spec.dim = 6;
  spec.input_features = 8;
  const SynthEncoder enc(spec), twin(spec);
  const auto ds = make_xor_dataset(1, 2, 120, 8);
  const auto b = enc.encode(ds.items[0].input);
  EXPECT_EQ(b.data.shape(), (Shape{5, 6, 6}));
  EXPECT_EQ(b.framerate_hz, 50u);
  EXPECT_EQ(enc.weight_bytes(), twin.weight_bytes());
  EXPECT_EQ(encode_bundle(twin.encode(ds.items[0].input)), encode_bundle(b));
  for (double v : b.data.data()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  spec.seed = 6;
  EXPECT_NE(SynthEncoder(spec).weight_bytes(), enc.weight_bytes());
}

TEST(Synth, SpecializedEncodersAreBlindToTheOtherGroupMean) {
  const auto task = make_complementary_task(3, 4, 200, 8, {.layers = 3, .dim = 8, .task = {}});
  const Tensor x = task.data.items[0].input;
  auto shifted = [&](std::size_t first_col) {
    std::vector<double> v(x.data().begin(), x.data().end());
    for (std::size_t r = 0; r < x.dim(0); ++r)
      for (std::size_t c = first_col; c < first_col + 4; ++c) v[r * 8 + c] += 2.0;
    return Tensor::from(x.shape(), v);
  };
  // A keeps group 1 (columns 0..3) and cannot see a shift of group 2.
  EXPECT_LT(max_abs_diff(task.a.encode(x).data, task.a.encode(shifted(4)).data), 1e-5);
  EXPECT_GT(max_abs_diff(task.a.encode(x).data, task.a.encode(shifted(0)).data), 1e-2);
  EXPECT_LT(max_abs_diff(task.b.encode(x).data, task.b.encode(shifted(0)).data), 1e-5);
  EXPECT_GT(max_abs_diff(task.b.encode(x).data, task.b.encode(shifted(4)).data), 1e-2);
}

TEST(Synth, ComplementarySeedsDerivedFromTaskSeed) {
  const auto t = make_complementary_task(9, 1, 40, 4, {.layers = 2, .dim = 4, .task = {}});
  EXPECT_EQ(t.a.spec().seed, splitmix64(9 ^ 0xa));
  EXPECT_EQ(t.b.spec().seed, splitmix64(9 ^ 0xb));
  EXPECT_EQ(t.a.spec().specialization, Specialization::group_a);
  EXPECT_EQ(t.b.spec().specialization, Specialization::group_b);
}

TEST(Synth, SplitsAreRoughlyEightyTenTen) {
  SynthDataset ds;
  ds.items.resize(10000);
  const double tr = static_cast<double>(ds.indices(Split::train).size());
  const double dv = static_cast<double>(ds.indices(Split::dev).size());
  const double te = static_cast<double>(ds.indices(Split::test).size());
  EXPECT_EQ(tr + dv + te, 10000.0);
  EXPECT_NEAR(tr / 10000, 0.8, 0.02);
  EXPECT_NEAR(dv / 10000, 0.1, 0.02);
  EXPECT_NEAR(te / 10000, 0.1, 0.02);
}

TEST(Synth, XorLabels) {
  const auto ds = make_xor_dataset(4, 300, 40, 6, {.noise = 0.0});
  EXPECT_EQ(ds.n_classes, 2u);
  for (const auto& item : ds.items) {
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      m0 += item.input.at({0, c});
      m1 += item.input.at({0, c + 3});
    }
    EXPECT_EQ(item.label, (m0 > 0) ^ (m1 > 0));
  }
  EXPECT_THROW(make_xor_dataset(1, 1, 10, 5), std::invalid_argument);
}

TEST(Synth, CtcStringsFitAndUseVocabulary) {
  const auto ds = make_ctc_task(2, 50, 5, 240, 12);
  EXPECT_EQ(ds.n_classes, 5u);
  const std::size_t T = 240 * 50 / 1000;
  for (const auto& item : ds.items) {
    ASSERT_FALSE(item.symbols.empty());
    EXPECT_LE(item.symbols.size() * 3, T);
    for (int s : item.symbols) {
      EXPECT_GE(s, 1);
      EXPECT_LE(s, 5);
    }
  }
  EXPECT_THROW(make_ctc_task(1, 1, 7, 240, 12), std::invalid_argument);
  EXPECT_THROW(make_ctc_task(1, 1, 3, 20, 12), std::invalid_argument);
}

TEST(Synth, VerifySpeakersInRange) {
  const auto ds = make_verify_task(8, 100, 40, 4, {.speakers = 3});
  for (const auto& item : ds.items) {
    EXPECT_GE(item.label, 0);
    EXPECT_LT(item.label, 3);
  }
  EXPECT_THROW(make_verify_task(8, 1, 40, 4, {.speakers = 1}), std::invalid_argument);
}

TEST(Synth, EncoderValidation) {
  EncoderSpec spec;
  spec.input_features = 4;
  spec.taps = {1, 2};
  spec.tap_width = 2;
  EXPECT_THROW(SynthEncoder{spec}, std::invalid_argument);
  spec.taps = {13};
  spec.tap_width = 1;
  EXPECT_THROW(SynthEncoder{spec}, std::invalid_argument);
  spec.taps.clear();
  spec.specialization = Specialization::group_a;
  spec.input_features = 5;
  EXPECT_THROW(SynthEncoder{spec}, std::invalid_argument);
}
