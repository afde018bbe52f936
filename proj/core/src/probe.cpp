#include "fusionkit/probe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fusionkit/ops.hpp"
#include "fusionkit/optim.hpp"
#include "fusionkit/random.hpp"

namespace fusionkit {

namespace {

Tensor rows_of(const std::vector<double>& x, std::size_t F, std::span<const std::size_t> rows) {
  std::vector<double> out(rows.size() * F);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(&x[rows[i] * F], F, &out[i * F]);
  return Tensor::from({rows.size(), F}, std::move(out));
}

Tensor init(Rng& rng, Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

ProbeResult train_probe(const Tensor& X, std::span<const int> labels, std::size_t n_classes,
                        std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows,
                        const ProbeOptions& opt) {
  if (X.rank() != 2 || X.dim(0) != labels.size()) throw ShapeError("train_probe: X must be N×F with N labels");
  if (train_rows.empty() || test_rows.empty()) throw std::invalid_argument("train_probe: empty split");
  const std::size_t N = X.dim(0), F = X.dim(1);

  // Standardize with training statistics.
  std::vector<double> x(X.data().begin(), X.data().end());
  for (std::size_t f = 0; f < F; ++f) {
    double m = 0.0, s = 0.0;
    for (auto r : train_rows) m += x[r * F + f];
    m /= static_cast<double>(train_rows.size());
    for (auto r : train_rows) s += (x[r * F + f] - m) * (x[r * F + f] - m);
    s = std::sqrt(s / static_cast<double>(train_rows.size()));
    if (s < 1e-12) s = 1.0;
    for (std::size_t r = 0; r < N; ++r) x[r * F + f] = (x[r * F + f] - m) / s;
  }

  Rng rng(opt.seed);
  std::vector<Tensor> params;
  const std::size_t H = opt.hidden;
  if (H) {
    params.push_back(init(rng, {F, H}, F));
    params.push_back(Tensor::zeros({H}, true));
    params.push_back(init(rng, {H, n_classes}, H));
  } else {
    params.push_back(init(rng, {F, n_classes}, F));
  }
  params.push_back(Tensor::zeros({n_classes}, true));
  auto forward = [&](const Tensor& in) {
    if (H) return add(matmul(gelu(add(matmul(in, params[0]), params[1])), params[2]), params[3]);
    return add(matmul(in, params[0]), params[1]);
  };

  AdamOptions ao;
  ao.lr = opt.lr;
  auto state = make_adam_state(params, ao);
  std::vector<std::size_t> batch(std::min(opt.batch, train_rows.size()));
  std::vector<int> targets(batch.size());
  for (std::size_t step = 0; step < opt.steps; ++step) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch[i] = train_rows[rng.below(train_rows.size())];
      targets[i] = labels[batch[i]];
    }
    Tensor loss = nll_loss(log_softmax(forward(rows_of(x, F, batch)), 1), targets);
    for (auto& p : params) p.zero_grad();
    backward(loss);
    adam_step(params, state);
  }

  NoGradGuard no_grad;
  Tensor logits = forward(rows_of(x, F, test_rows));
  std::vector<std::size_t> hit(n_classes, 0), total(n_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    const double* row = &logits.data()[i * n_classes];
    const int pred = static_cast<int>(std::max_element(row, row + n_classes) - row);
    const int y = labels[test_rows[i]];
    ++total[static_cast<std::size_t>(y)];
    if (pred == y) {
      ++correct;
      ++hit[static_cast<std::size_t>(y)];
    }
  }
  ProbeResult res;
  res.accuracy = static_cast<double>(correct) / static_cast<double>(test_rows.size());
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (!total[c]) continue;
    ++present;
    res.balanced_accuracy += static_cast<double>(hit[c]) / static_cast<double>(total[c]);
  }
  res.balanced_accuracy /= static_cast<double>(std::max<std::size_t>(present, 1));
  return res;
}

std::vector<double> pooled_features(const HiddenStateBundle& bundle, int layer) {
  const std::size_t L = bundle.layers(), T = bundle.frames(), D = bundle.dim();
  auto h = bundle.data.data();
  std::vector<double> out;
  for (std::size_t l = 0; l < L; ++l) {
    if (layer >= 0 && static_cast<std::size_t>(layer) != l) continue;
    for (std::size_t d = 0; d < D; ++d) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += h[(l * T + t) * D + d];
      out.push_back(s / static_cast<double>(T));
    }
  }
  if (out.empty()) throw std::out_of_range("pooled_features: layer " + std::to_string(layer) + " out of range");
  return out;
}

}  // namespace fusionkit
