#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "fusionkit/tensor.hpp"

namespace fusionkit {

std::uint64_t splitmix64(std::uint64_t x);

/// Seeded generator with deterministic substreams. The engine is
/// std::mt19937_64; uniform and normal draws are computed here rather than
/// through <random> distributions so sequences are identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent child generator; the parent state is not advanced.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// i.i.d. standard Gumbel samples g = -ln(-ln(u)).
Tensor sample_gumbel(const Shape& shape, std::uint64_t seed);
Tensor sample_gumbel(const Shape& shape, Rng& rng);

inline double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

}  // namespace fusionkit
