#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fusionkit/tensor.hpp"

namespace fusionkit {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamOptions&) const = default;
};

struct OptimizerState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t step = 0;
  AdamOptions options;
};

OptimizerState make_adam_state(std::span<const Tensor> params, const AdamOptions& options = {});

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient. A parameter with no gradient is skipped, moments included.
void adam_step(std::span<Tensor> params, OptimizerState& state);

/// Same update with explicit gradient arrays.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, OptimizerState& state);

}  // namespace fusionkit
