#include <benchmark/benchmark.h>

#include "fusionkit/interfaces.hpp"
#include "fusionkit/ops.hpp"

using namespace fusionkit;

namespace {

std::vector<Tensor> stacks(std::size_t n, std::size_t L, std::size_t T, std::size_t D) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(i);
    std::vector<double> v(L * T * D);
    for (auto& x : v) x = rng.normal();
    out.push_back(Tensor::from({L, T, D}, v));
  }
  return out;
}

void run(benchmark::State& state, InterfaceKind kind, bool with_backward) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto T = static_cast<std::size_t>(state.range(1));
  InterfaceConfig c;
  c.kind = kind;
  c.output_dim = 16;
  auto iface = Interface::build(c, n, 13, std::vector<std::size_t>(n, 16));
  const auto in = stacks(n, 13, T, 16);
  for (auto _ : state) {
    Tensor y = iface.forward(in, Mode::train);
    if (with_backward) {
      for (auto& p : iface.parameters()) p.value.zero_grad();
      backward(sum(y));
    }
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}

void BM_WsForward(benchmark::State& s) { run(s, InterfaceKind::ws, false); }
void BM_GumdForward(benchmark::State& s) { run(s, InterfaceKind::gumd, false); }
void BM_HConvForward(benchmark::State& s) { run(s, InterfaceKind::hconv, false); }
void BM_CHConvForward(benchmark::State& s) { run(s, InterfaceKind::chconv, false); }
void BM_WsTrainStep(benchmark::State& s) { run(s, InterfaceKind::ws, true); }
void BM_GumdTrainStep(benchmark::State& s) { run(s, InterfaceKind::gumd, true); }
void BM_HConvTrainStep(benchmark::State& s) { run(s, InterfaceKind::hconv, true); }
void BM_CHConvTrainStep(benchmark::State& s) { run(s, InterfaceKind::chconv, true); }

}  // namespace

#define FK_ARGS ->Args({1, 50})->Args({2, 50})->Args({3, 50})->Args({2, 200})
BENCHMARK(BM_WsForward) FK_ARGS;
BENCHMARK(BM_GumdForward) FK_ARGS;
BENCHMARK(BM_HConvForward) FK_ARGS;
BENCHMARK(BM_CHConvForward) FK_ARGS;
BENCHMARK(BM_WsTrainStep) FK_ARGS;
BENCHMARK(BM_GumdTrainStep) FK_ARGS;
BENCHMARK(BM_HConvTrainStep) FK_ARGS;
BENCHMARK(BM_CHConvTrainStep) FK_ARGS;
