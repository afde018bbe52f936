#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>

#include "fusionkit/tensor.hpp"

namespace fusionkit {

class NonDeterministicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Stencil {
  central3,  // (f(x+h) - f(x-h)) / 2h
  central5,  // fourth-order: (f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h
};

struct GradCheckOptions {
  double eps = 1e-5;
  Stencil stencil = Stencil::central3;
  /// Coordinates probed per tensor; 0 probes every coordinate. When limited,
  /// coordinates are drawn without replacement from `coordinate_seed`.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t coordinate_seed = 0;
  /// Extra denominator floor as a fraction of the tensor's largest analytic
  /// gradient. 0 gives the plain max(|analytic|, |numeric|, 1e-8) form.
  double tensor_floor = 0.0;
};

struct GradCheckReport {
  double worst = 0.0;        // under the configured floor
  double worst_plain = 0.0;  // denominator max(|analytic|, |numeric|, 1e-8)
  double worst_abs = 0.0;
  std::size_t coords = 0;
};

/// Worst coordinate-wise relative error between backward() gradients and
/// central differences, with denominator max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<Tensor(const Tensor&)>& forward_fn, const Tensor& x, double eps);

/// Same comparison for every tensor in `params` (leaves that require grad),
/// with `forward_fn` reading them by reference.
double grad_check_params(const std::function<Tensor()>& forward_fn, std::span<Tensor> params,
                         const GradCheckOptions& options = {});
GradCheckReport grad_check_report(const std::function<Tensor()>& forward_fn, std::span<Tensor> params,
                                  const GradCheckOptions& options = {});

}  // namespace fusionkit
