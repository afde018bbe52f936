#include <benchmark/benchmark.h>

#include "fusionkit/heads.hpp"
#include "fusionkit/metrics.hpp"
#include "fusionkit/ops.hpp"

using namespace fusionkit;

namespace {

void BM_CtcLoss(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const std::size_t C = 6;
  Rng rng(1);
  std::vector<double> v(T * C);
  for (auto& x : v) x = rng.normal();
  std::vector<int> y;
  for (std::size_t i = 0; i < T / 4; ++i) y.push_back(1 + static_cast<int>(rng.below(C - 1)));
  for (auto _ : state) {
    Tensor logits = Tensor::from({T, C}, v, true);
    Tensor loss = ctc_loss(log_softmax(logits, 1), y);
    backward(loss);
    benchmark::DoNotOptimize(logits.grad().data());
  }
}
BENCHMARK(BM_CtcLoss)->Arg(24)->Arg(100)->Arg(400);

void BM_EditDistance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  std::vector<int> a(n), b(n);
  for (auto& x : a) x = static_cast<int>(rng.below(8));
  for (auto& x : b) x = static_cast<int>(rng.below(8));
  for (auto _ : state) benchmark::DoNotOptimize(edit_distance(a, b));
}
BENCHMARK(BM_EditDistance)->Arg(16)->Arg(128)->Arg(1024);

void BM_Eer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> pos(n), neg(n);
  for (auto& x : pos) x = rng.normal() + 1.0;
  for (auto& x : neg) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(eer(pos, neg));
}
BENCHMARK(BM_Eer)->Arg(100)->Arg(10000);

}  // namespace
