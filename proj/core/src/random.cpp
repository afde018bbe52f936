#include "fusionkit/random.hpp"

#include <cmath>
#include <numbers>

namespace fusionkit {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))), engine_(seed_) {}

Rng Rng::split(std::uint64_t stream) const { return Rng(seed_, stream + 1); }

double Rng::uniform_open() {
  // 53 random bits mapped to the midpoints of a 2^-53 grid: never 0 or 1.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }

double Rng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform_open();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) return 0;
  return static_cast<std::size_t>(uniform_open() * static_cast<double>(n)) % n;
}

Tensor sample_gumbel(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return sample_gumbel(shape, rng);
}

Tensor sample_gumbel(const Shape& shape, Rng& rng) {
  std::vector<double> g(numel(shape));
  for (auto& v : g) v = gumbel_from_uniform(rng.uniform_open());
  return Tensor::from(shape, std::move(g));
}

}  // namespace fusionkit
