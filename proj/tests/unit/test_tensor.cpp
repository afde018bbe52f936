#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <set>

#include "fusionkit/grad_check.hpp"
#include "fusionkit/ops.hpp"
#include "fusionkit/oracles/oracles.hpp"
#include "fusionkit/random.hpp"

using namespace fusionkit;

namespace {

Tensor randn(Rng& rng, Shape shape, double scale = 1.0, bool grad = false) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), grad);
}

// Weighted sum so every output coordinate gets a distinct upstream gradient.
Tensor probe_loss(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed ^ 0x5eed);
  return sum(mul(y, randn(rng, y.shape())));
}

}  // namespace

TEST(Tensor, ConstructionAndAccess) {
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_EQ(t.at({1, 2}), 6.0);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(t.item(), ShapeError);
  EXPECT_EQ(Tensor::scalar(4.5).item(), 4.5);
  EXPECT_EQ(numel({}), 1u);
}

TEST(Tensor, MatmulGradientExample) {
  Tensor a = Tensor::full({1, 2}, 1.0, true);
  Tensor b = Tensor::from({2, 1}, {3, 4});
  backward(sum(matmul(a, b)));
  ASSERT_TRUE(a.has_grad());
  EXPECT_DOUBLE_EQ(a.grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], 4.0);
  EXPECT_FALSE(b.has_grad());
}

TEST(Tensor, SharedSubexpressionAccumulatesOnce) {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tensor y = mul(x, x);     // dy/dx = 2x
  Tensor z = add(y, y);     // reuses y twice
  backward(sum(z));         // d/dx = 4x
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 4.0 * x.data()[i]);
}

TEST(Tensor, TopologicalOrderVisitsEachNodeOnce) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor a = tanh(x), b = gelu(x);
  Tensor c = add(mul(a, b), a);
  const auto order = topological_order(sum(c));
  std::set<detail::Node*> seen(order.begin(), order.end());
  EXPECT_EQ(seen.size(), order.size());
  EXPECT_EQ(order.back(), &x.node());
}

TEST(Tensor, BackwardReleasesGraph) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor loss = sum(mul(x, x));
  backward(loss);
  EXPECT_TRUE(loss.node().parents.empty());
  EXPECT_FALSE(static_cast<bool>(loss.node().backward));
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    Tensor y = mul(x, x);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(mul(x, x).requires_grad());
}

TEST(Tensor, MutatingNonLeafThrows) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor y = mul(x, x);
  EXPECT_THROW(y.mutable_data(), std::logic_error);
  EXPECT_NO_THROW(x.mutable_data());
}

TEST(Ops, BroadcastAddAlongLeadingAxes) {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2}, {10, 20});
  Tensor c = add(a, b);
  EXPECT_EQ(c.at({1, 1}), 24.0);
  EXPECT_THROW(add(a, Tensor::from({3}, {1, 2, 3})), ShapeError);
}

TEST(Ops, MatmulMatchesNaive) {
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t m = 1 + rng.below(5), k = 1 + rng.below(5), p = 1 + rng.below(5);
    Tensor a = randn(rng, {m, k}), b = randn(rng, {k, p});
    const auto ref = oracles::matmul_naive(a.data(), b.data(), m, k, p);
    const Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(c.data()[i], ref[i], 1e-12);
  }
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST(Ops, Conv1dMatchesNaive) {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(3), K = 1 + rng.below(3);
    const std::size_t S = K + rng.below(8), stride = 1 + rng.below(2), pad = rng.below(2);
    Tensor x = randn(rng, {cin, S}), w = randn(rng, {cout, cin, K});
    const auto ref = oracles::conv1d_naive(x.data(), cin, S, w.data(), cout, K, stride, pad);
    const Tensor y = conv1d(x, w, stride, pad);
    ASSERT_EQ(y.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-12);
  }
}

TEST(Ops, ConvSeqAgreesWithPerSignalConv) {
  Rng rng(5);
  const std::size_t S = 7, B = 3, C = 2, Co = 4, K = 3;
  Tensor x = randn(rng, {S, B, C}), w = randn(rng, {Co, C, K});
  const Tensor y = conv1d_seq(x, w, 2, 1);
  const std::size_t So = conv_output_length(S, K, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{So, B, Co}));
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> sig(C * S);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t c = 0; c < C; ++c) sig[c * S + s] = x.data()[(s * B + b) * C + c];
    const Tensor ys = conv1d(Tensor::from({C, S}, sig), w, 2, 1);
    for (std::size_t s = 0; s < So; ++s)
      for (std::size_t o = 0; o < Co; ++o) EXPECT_NEAR(y.data()[(s * B + b) * Co + o], ys.data()[o * So + s], 1e-12);
  }
}

TEST(Ops, SoftmaxRowsSumToOneAndLogSoftmaxAgrees) {
  Rng rng(6);
  Tensor x = randn(rng, {4, 5}, 30.0);
  const Tensor s = softmax(x, 1), ls = log_softmax(x, 1);
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      total += s.at({r, c});
      EXPECT_NEAR(std::log(std::max(s.at({r, c}), 1e-300)), ls.at({r, c}), 1e-9 + 1e-12 * std::abs(ls.at({r, c})));
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Ops, StraightThroughForwardIsHardGradientIsSoft) {
  Tensor soft = Tensor::from({3}, {0.2, 0.5, 0.3}, true);
  Tensor hard = Tensor::from({3}, {0, 1, 0});
  Tensor y = straight_through(soft, hard);
  EXPECT_EQ(y.data()[1], 1.0);
  backward(sum(mul(y, Tensor::from({3}, {1, 2, 3}))));
  EXPECT_EQ(soft.grad()[0], 1.0);
  EXPECT_EQ(soft.grad()[2], 3.0);
}

TEST(Ops, NllLossAndL2Normalize) {
  Tensor lp = log_softmax(Tensor::from({2, 3}, {1, 2, 3, 0, 0, 0}), 1);
  const std::vector<int> labels{2, 0};
  EXPECT_NEAR(nll_loss(lp, labels).item(), -(lp.at({0, 2}) + lp.at({1, 0})) / 2.0, 1e-15);
  const Tensor n = l2_normalize(Tensor::from({1, 2}, {3, 4}));
  EXPECT_NEAR(n.data()[0], 0.6, 1e-15);
  EXPECT_NEAR(n.data()[1], 0.8, 1e-15);
}

TEST(GradCheck, GeluOnGrid) {
  std::vector<double> v;
  for (int i = 0; i <= 40; ++i) v.push_back(-2.0 + 0.1 * i);
  const Tensor x = Tensor::from({v.size()}, v);
  EXPECT_LT(grad_check([](const Tensor& t) { return sum(gelu(t)); }, x, 1e-5), 1e-6);
}

TEST(GradCheck, DetectsWrongGradient) {
  // An op whose backward is deliberately off by a factor of two.
  auto bad = [](const Tensor& x) {
    std::vector<double> out(x.data().begin(), x.data().end());
    for (auto& v : out) v = v * v;
    return sum(Tensor::from_op(x.shape(), out, {x}, [](detail::Node& self) {
      auto& p = *self.parents[0];
      auto& g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * 4.0 * p.data[i];
    }));
  };
  EXPECT_GT(grad_check(bad, Tensor::from({3}, {0.5, -1.0, 2.0}), 1e-5), 0.4);
}

TEST(GradCheck, NonDeterministicForwardIsRejected) {
  int calls = 0;
  auto f = [&](const Tensor& x) { return sum(scale(x, 1.0 + 1e-3 * ++calls)); };
  EXPECT_THROW(grad_check(f, Tensor::from({2}, {1, 2}), 1e-5), NonDeterministicError);
}

// Every differentiable operation on randomized small inputs, 20 seeds each.
TEST(GradCheck, EveryOperationProperty) {
  using Fn = std::function<Tensor(const Tensor&, Rng&)>;
  const std::vector<std::pair<const char*, Fn>> ops = {
      {"add", [](const Tensor& x, Rng& r) { return add(x, randn(r, x.shape())); }},
      {"sub", [](const Tensor& x, Rng& r) { return sub(randn(r, x.shape()), x); }},
      {"mul", [](const Tensor& x, Rng& r) { return mul(x, randn(r, x.shape())); }},
      {"mul_self", [](const Tensor& x, Rng&) { return mul(x, x); }},
      {"scale", [](const Tensor& x, Rng&) { return scale(x, -1.7); }},
      {"gelu", [](const Tensor& x, Rng&) { return gelu(x); }},
      {"tanh", [](const Tensor& x, Rng&) { return tanh(x); }},
      {"matmul_l", [](const Tensor& x, Rng& r) { return matmul(reshape(x, {3, 4}), randn(r, {4, 2})); }},
      {"matmul_r", [](const Tensor& x, Rng& r) { return matmul(randn(r, {2, 3}), reshape(x, {3, 4})); }},
      {"conv1d_in", [](const Tensor& x, Rng& r) { return conv1d(reshape(x, {2, 6}), randn(r, {3, 2, 3}), 2, 1); }},
      {"conv1d_w", [](const Tensor& x, Rng& r) { return conv1d(randn(r, {4, 5}), reshape(x, {3, 4, 1}), 1, 0); }},
      {"conv1d_seq", [](const Tensor& x, Rng& r) { return conv1d_seq(reshape(x, {6, 1, 2}), randn(r, {2, 2, 3}), 2, 1); }},
      {"softmax0", [](const Tensor& x, Rng&) { return softmax(reshape(x, {3, 4}), 0); }},
      {"softmax1", [](const Tensor& x, Rng&) { return softmax(reshape(x, {3, 4}), 1); }},
      {"log_softmax", [](const Tensor& x, Rng&) { return log_softmax(reshape(x, {4, 3}), 1); }},
      {"mean", [](const Tensor& x, Rng&) { return mean(x); }},
      {"mean_axis", [](const Tensor& x, Rng&) { return mean_axis(reshape(x, {2, 6}), 0); }},
      {"concat", [](const Tensor& x, Rng& r) {
         const Tensor parts[] = {reshape(x, {3, 4}), randn(r, {3, 2})};
         return concat_last(parts);
       }},
      {"slice", [](const Tensor& x, Rng&) { return slice_rows(reshape(x, {4, 3}), 1, 2); }},
      {"layer_mix_h", [](const Tensor& x, Rng& r) { return layer_mix(reshape(x, {3, 2, 2}), randn(r, {3})); }},
      {"layer_mix_w", [](const Tensor& x, Rng& r) { return layer_mix(randn(r, {3, 2, 4}), reshape(x, {3, 4})); }},
      {"l2_normalize", [](const Tensor& x, Rng&) { return l2_normalize(reshape(x, {3, 4})); }},
      {"nll", [](const Tensor& x, Rng&) {
         const std::vector<int> labels{0, 2, 1, 1};
         return nll_loss(log_softmax(reshape(x, {4, 3}), 1), labels);
       }},
  };
  for (const auto& [name, op] : ops) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng data_rng(seed);
      const Tensor x = randn(data_rng, {12}, 0.8);
      worst = std::max(worst, grad_check(
                                  [&](const Tensor& t) {
                                    Rng r(seed * 31 + 7);  // same constants on every evaluation
                                    return probe_loss(op(t, r), seed);
                                  },
                                  x, 1e-5));
    }
    EXPECT_LE(worst, 1e-5) << name;
  }
  // Broadcast operand: the suffix-shaped tensor gets the summed gradient.
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng data_rng(seed);
    const Tensor b = randn(data_rng, {3, 4});
    worst = std::max(worst, grad_check(
                                [&](const Tensor& t) {
                                  Rng r(seed);
                                  return probe_loss(add(randn(r, {2, 3, 4}), t), seed);
                                },
                                b, 1e-5));
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(GradCheck, FourthOrderStencilAndTensorFloorAreOptIn) {
  Rng rng(9);
  Tensor x = randn(rng, {6}, 1.0, true);
  std::vector<Tensor> params{x};
  auto f = [&] { return sum(tanh(mul(x, x))); };
  GradCheckOptions plain;
  GradCheckOptions wide;
  wide.eps = 1e-3;
  wide.stencil = Stencil::central5;
  const auto a = grad_check_report(f, params, plain);
  const auto b = grad_check_report(f, params, wide);
  EXPECT_LT(a.worst, 1e-6);
  EXPECT_LT(b.worst, 1e-8);
  EXPECT_EQ(a.worst, a.worst_plain);
  EXPECT_EQ(a.coords, 6u);
}
