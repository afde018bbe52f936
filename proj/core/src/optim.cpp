#include "fusionkit/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fusionkit {

OptimizerState make_adam_state(std::span<const Tensor> params, const AdamOptions& options) {
  OptimizerState s;
  s.options = options;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, OptimizerState& state) {
  if (params.size() != state.m.size() || grads.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter/state count mismatch");
  }
  const auto& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != w.size()) throw ShapeError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    if (g.empty()) continue;
    if (g.size() != w.size()) throw ShapeError("adam_step: gradient shape mismatch for parameter " + std::to_string(i));
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      w[k] -= o.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + o.eps);
    }
  }
}

void adam_step(std::span<Tensor> params, OptimizerState& state) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.grad().begin(), p.grad().end());
  adam_step(params, grads, state);
}

}  // namespace fusionkit
