#include "fusionkit/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "fusionkit/random.hpp"

namespace fusionkit {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  return f().item();
}

std::vector<std::size_t> probe_coordinates(std::size_t n, const GradCheckOptions& opt, std::uint64_t salt) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (opt.max_coords_per_tensor == 0 || opt.max_coords_per_tensor >= n) return idx;
  Rng rng(opt.coordinate_seed, salt);
  for (std::size_t i = 0; i < opt.max_coords_per_tensor; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(opt.max_coords_per_tensor);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check_report(const std::function<Tensor()>& forward_fn, std::span<Tensor> params,
                                  const GradCheckOptions& options) {
  for (auto& p : params) p.zero_grad();
  Tensor loss = forward_fn();
  if (loss.size() != 1) throw ShapeError("grad_check: forward_fn must return a scalar");
  const double base = loss.item();
  backward(loss);
  const double again = evaluate(forward_fn);
  if (std::memcmp(&base, &again, sizeof(double)) != 0) {
    throw NonDeterministicError("grad_check: forward_fn is not deterministic");
  }

  GradCheckReport rep;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    std::vector<double> analytic(p.size(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    double scale = 0.0;
    for (double g : analytic) scale = std::max(scale, std::abs(g));
    const double floor = std::max(1e-8, options.tensor_floor * scale);
    auto values = p.mutable_data();
    for (std::size_t i : probe_coordinates(p.size(), options, k)) {
      const double saved = values[i];
      auto at = [&](double offset) {
        values[i] = saved + offset;
        const double v = evaluate(forward_fn);
        values[i] = saved;
        return v;
      };
      const double h = options.eps;
      const double numeric = options.stencil == Stencil::central3
                                 ? (at(h) - at(-h)) / (2.0 * h)
                                 : (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
      const double diff = std::abs(analytic[i] - numeric);
      const double mag = std::max(std::abs(analytic[i]), std::abs(numeric));
      rep.worst = std::max(rep.worst, diff / std::max(mag, floor));
      rep.worst_plain = std::max(rep.worst_plain, diff / std::max(mag, 1e-8));
      rep.worst_abs = std::max(rep.worst_abs, diff);
      ++rep.coords;
    }
  }
  return rep;
}

double grad_check_params(const std::function<Tensor()>& forward_fn, std::span<Tensor> params,
                         const GradCheckOptions& options) {
  return grad_check_report(forward_fn, params, options).worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& forward_fn, const Tensor& x, double eps) {
  Tensor probe = x.detach(true);
  std::vector<Tensor> params{probe};
  GradCheckOptions opt;
  opt.eps = eps;
  return grad_check_params([&] { return forward_fn(probe); }, params, opt);
}

}  // namespace fusionkit
