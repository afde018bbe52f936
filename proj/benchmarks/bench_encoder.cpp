#include <benchmark/benchmark.h>

#include "fusionkit/matcher.hpp"
#include "fusionkit/synth.hpp"

using namespace fusionkit;

namespace {

void BM_EncoderEncode(benchmark::State& state) {
  EncoderSpec spec;
  spec.layers = static_cast<std::size_t>(state.range(0));
  spec.dim = 16;
  spec.input_features = 8;
  const SynthEncoder enc(spec);
  const auto ds = make_xor_dataset(1, 1, 1000, 8);
  for (auto _ : state) benchmark::DoNotOptimize(enc.encode(ds.items[0].input).data.data().data());
}
BENCHMARK(BM_EncoderEncode)->Arg(4)->Arg(12)->Arg(24);

void BM_MatchBundles(benchmark::State& state) {
  EncoderSpec a;
  a.layers = 12;
  a.dim = 16;
  EncoderSpec b = a;
  b.layers = 24;
  b.framerate_hz = 100;
  b.seed = 1;
  const auto ds = make_xor_dataset(1, 1, 1000, 8);
  const std::vector<HiddenStateBundle> in{SynthEncoder(a).encode(ds.items[0].input),
                                          SynthEncoder(b).encode(ds.items[0].input)};
  for (auto _ : state) benchmark::DoNotOptimize(match_bundles(in, {}).size());
}
BENCHMARK(BM_MatchBundles);

}  // namespace

BENCHMARK_MAIN();
