#include "fusionkit/heads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fusionkit/ops.hpp"
#include "fusionkit/random.hpp"

namespace fusionkit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

Tensor uniform_init(Rng& rng, Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

std::size_t ctc_min_frames(std::span<const int> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++n;
  return n;
}

Tensor ctc_loss(const Tensor& logprobs, std::span<const int> labels) {
  if (logprobs.rank() != 2) throw ShapeError("ctc_loss: logprobs must be T×(V+1), got " + shape_str(logprobs.shape()));
  if (labels.empty()) throw std::invalid_argument("ctc_loss: empty label sequence");
  const std::size_t T = logprobs.dim(0), C = logprobs.dim(1);
  for (int l : labels) {
    if (l <= kBlank || static_cast<std::size_t>(l) >= C) {
      throw std::out_of_range("ctc_loss: label " + std::to_string(l) + " outside 1.." + std::to_string(C - 1));
    }
  }
  if (T < ctc_min_frames(labels)) {
    throw std::invalid_argument("ctc_loss: " + std::to_string(T) + " frames cannot emit " +
                                std::to_string(labels.size()) + " labels (need " +
                                std::to_string(ctc_min_frames(labels)) + ")");
  }
  const std::size_t S = 2 * labels.size() + 1;
  std::vector<int> ext(S, kBlank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  auto lp = logprobs.data();
  auto at = [&](std::size_t t, std::size_t s) { return lp[t * C + static_cast<std::size_t>(ext[s])]; };
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(T * S, kNegInf), beta(T * S, kNegInf);
  alpha[0] = at(0, 0);
  alpha[1] = at(0, 1);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha[(t - 1) * S + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * S + s - 1]);
      if (can_skip(s)) a = log_add(a, alpha[(t - 1) * S + s - 2]);
      alpha[t * S + s] = a == kNegInf ? kNegInf : a + at(t, s);
    }
  const double log_p = log_add(alpha[(T - 1) * S + S - 1], alpha[(T - 1) * S + S - 2]);
  if (!std::isfinite(log_p)) throw std::domain_error("ctc_loss: label sequence has zero probability");

  beta[(T - 1) * S + S - 1] = at(T - 1, S - 1);
  beta[(T - 1) * S + S - 2] = at(T - 1, S - 2);
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t s = 0; s < S; ++s) {
      double b = beta[(t + 1) * S + s];
      if (s + 1 < S) b = log_add(b, beta[(t + 1) * S + s + 1]);
      if (s + 2 < S && can_skip(s + 2)) b = log_add(b, beta[(t + 1) * S + s + 2]);
      beta[t * S + s] = b == kNegInf ? kNegInf : b + at(t, s);
    }

  // d(-log p)/d lp[t,k] = -Σ_{s: ext[s]=k} exp(α + β - lp[t,k] - log p).
  std::vector<double> grad(T * C, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = alpha[t * S + s] + beta[t * S + s];
      if (ab == kNegInf) continue;
      grad[t * C + static_cast<std::size_t>(ext[s])] -= std::exp(ab - at(t, s) - log_p);
    }
  return Tensor::from_op({}, {-log_p}, {logprobs}, [grad = std::move(grad)](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * grad[i];
  });
}

std::vector<int> ctc_greedy_decode(const Tensor& logprobs) {
  if (logprobs.rank() != 2) throw ShapeError("ctc_greedy_decode: expected T×(V+1), got " + shape_str(logprobs.shape()));
  const std::size_t T = logprobs.dim(0), C = logprobs.dim(1);
  auto lp = logprobs.data();
  std::vector<int> out;
  int prev = kBlank;
  for (std::size_t t = 0; t < T; ++t) {
    const double* row = &lp[t * C];
    const int best = static_cast<int>(std::max_element(row, row + C) - row);
    if (best != kBlank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

std::string format_transcript(const std::string& item_id, std::span<const int> symbols) {
  std::string out = item_id + '\t';
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(symbols[i]);
  }
  return out;
}

Tensor classify_forward(const Tensor& feat, const Tensor& weight, const Tensor& bias) {
  if (feat.rank() != 2) throw ShapeError("classify_forward: features must be T×D, got " + shape_str(feat.shape()));
  const std::size_t D = feat.dim(1);
  Tensor pooled = reshape(mean_axis(feat, 0), {1, D});
  Tensor logits = add(matmul(pooled, weight), bias);
  return reshape(log_softmax(logits, 1), {logits.dim(1)});
}

Tensor embed_utterance(const Tensor& feat, const Tensor& weight, const Tensor& bias) {
  if (feat.rank() != 2) throw ShapeError("embed_utterance: features must be T×D, got " + shape_str(feat.shape()));
  const std::size_t D = feat.dim(1);
  Tensor pooled = reshape(mean_axis(feat, 0), {1, D});
  Tensor e = add(matmul(pooled, weight), bias);
  return reshape(l2_normalize(e), {e.dim(1)});
}

double cosine_score(std::span<const double> e1, std::span<const double> e2) {
  if (e1.size() != e2.size() || e1.empty()) throw ShapeError("cosine_score: embedding sizes differ");
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    dot += e1[i] * e2[i];
    n1 += e1[i] * e1[i];
    n2 += e2[i] * e2[i];
  }
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw std::domain_error("cosine_score: zero-norm embedding");
  return std::clamp(dot / std::sqrt(n1 * n2), -1.0, 1.0);
}

const char* to_string(HeadKind k) {
  switch (k) {
    case HeadKind::ctc: return "ctc";
    case HeadKind::classify: return "classify";
    case HeadKind::verify: return "verify";
  }
  return "classify";
}

Head Head::build(const HeadConfig& config) {
  if (config.input_dim == 0) throw std::invalid_argument("head input_dim must be positive");
  if (config.classes < 2) throw std::invalid_argument("head needs at least two classes/symbols/speakers");
  Head h;
  h.config_ = config;
  Rng rng = Rng(config.rng_seed).split(3);
  const std::size_t D = config.input_dim;
  switch (config.kind) {
    case HeadKind::ctc:
      h.params_.push_back({"head.weight", uniform_init(rng, {D, config.classes + 1}, D)});
      h.params_.push_back({"head.bias", Tensor::zeros({config.classes + 1}, true)});
      break;
    case HeadKind::classify:
      h.params_.push_back({"head.weight", uniform_init(rng, {D, config.classes}, D)});
      h.params_.push_back({"head.bias", Tensor::zeros({config.classes}, true)});
      break;
    case HeadKind::verify:
      if (config.embed_dim == 0) throw std::invalid_argument("verify head embed_dim must be positive");
      h.params_.push_back({"head.weight", uniform_init(rng, {D, config.embed_dim}, D)});
      h.params_.push_back({"head.bias", Tensor::zeros({config.embed_dim}, true)});
      h.params_.push_back({"head.spk.weight", uniform_init(rng, {config.embed_dim, config.classes}, config.embed_dim)});
      h.params_.push_back({"head.spk.bias", Tensor::zeros({config.classes}, true)});
      break;
  }
  return h;
}

std::size_t Head::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Tensor Head::pooled(const Tensor& feat, std::size_t batch) const {
  if (feat.rank() != 2 || batch == 0 || feat.dim(0) % batch != 0 || feat.dim(1) != config_.input_dim) {
    throw ShapeError("head: features " + shape_str(feat.shape()) + " do not split into " + std::to_string(batch) +
                     " items of width " + std::to_string(config_.input_dim));
  }
  const std::size_t T = feat.dim(0) / batch;
  return mean_axis(reshape(feat, {batch, T, config_.input_dim}), 1);
}

Tensor Head::frame_logprobs(const Tensor& feat) const {
  if (config_.kind != HeadKind::ctc) throw std::logic_error("frame_logprobs on a non-ctc head");
  return log_softmax(add(matmul(feat, params_[0].value), params_[1].value), 1);
}

Tensor Head::class_logprobs(const Tensor& feat, std::size_t batch) const {
  if (config_.kind != HeadKind::classify) throw std::logic_error("class_logprobs on a non-classify head");
  return log_softmax(add(matmul(pooled(feat, batch), params_[0].value), params_[1].value), 1);
}

Tensor Head::embeddings(const Tensor& feat, std::size_t batch) const {
  if (config_.kind != HeadKind::verify) throw std::logic_error("embeddings on a non-verify head");
  return l2_normalize(add(matmul(pooled(feat, batch), params_[0].value), params_[1].value));
}

Tensor Head::loss(const Tensor& feat, std::size_t batch, const BatchTargets& targets) const {
  switch (config_.kind) {
    case HeadKind::ctc: {
      if (targets.sequences.size() != batch) throw std::invalid_argument("ctc head: one label sequence per item");
      if (feat.rank() != 2 || feat.dim(0) % batch != 0) throw ShapeError("ctc head: bad feature batch");
      const std::size_t T = feat.dim(0) / batch;
      Tensor lp = frame_logprobs(feat);
      Tensor total;
      for (std::size_t b = 0; b < batch; ++b) {
        Tensor l = ctc_loss(batch == 1 ? lp : slice_rows(lp, b * T, T), targets.sequences[b]);
        total = total.defined() ? add(total, l) : l;
      }
      return scale(total, 1.0 / static_cast<double>(batch));
    }
    case HeadKind::classify:
      return nll_loss(class_logprobs(feat, batch), targets.labels);
    case HeadKind::verify: {
      Tensor logits = add(matmul(embeddings(feat, batch), params_[2].value), params_[3].value);
      return nll_loss(log_softmax(logits, 1), targets.labels);
    }
  }
  throw std::logic_error("unreachable head kind");
}

}  // namespace fusionkit
