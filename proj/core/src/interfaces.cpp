#include "fusionkit/interfaces.hpp"

#include <cmath>
#include <stdexcept>

#include "fusionkit/matcher.hpp"
#include "fusionkit/ops.hpp"

namespace fusionkit {

const char* to_string(InterfaceKind k) {
  switch (k) {
    case InterfaceKind::ws: return "ws";
    case InterfaceKind::gumd: return "gumd";
    case InterfaceKind::hconv: return "hconv";
    case InterfaceKind::chconv: return "chconv";
  }
  return "ws";
}

InterfaceKind parse_interface_kind(const std::string& s) {
  if (s == "ws") return InterfaceKind::ws;
  if (s == "gumd") return InterfaceKind::gumd;
  if (s == "hconv") return InterfaceKind::hconv;
  if (s == "chconv") return InterfaceKind::chconv;
  throw std::invalid_argument("unknown interface kind '" + s + "' (expected ws, gumd, hconv or chconv)");
}

void InterfaceConfig::validate() const {
  if (output_dim == 0) throw std::invalid_argument("interface output_dim must be positive");
  if (hconv_kernel < 2) throw std::invalid_argument("hconv_kernel must be at least 2");
  if (hconv_stride < 1) throw std::invalid_argument("hconv_stride must be at least 1");
  if (!(gumbel_tau > 0.0)) throw std::invalid_argument("gumbel_tau must be positive");
}

Tensor ws_forward(const Tensor& h, const Tensor& logits) {
  if (logits.rank() != 1 || h.rank() != 3 || logits.dim(0) != h.dim(0)) {
    throw ShapeError("ws_forward: logits " + shape_str(logits.shape()) + " do not match hidden states " +
                     shape_str(h.shape()));
  }
  return layer_mix(h, softmax(logits, 0));
}

Tensor gumd_weights(const Tensor& logits, const Tensor& noise, double tau, bool hard) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumd: tau must be positive, got " + std::to_string(tau));
  if (logits.rank() != 2) throw ShapeError("gumd: logits must be L×D, got " + shape_str(logits.shape()));
  Tensor z = logits;
  if (noise.defined()) {
    if (noise.shape() != logits.shape()) {
      throw ShapeError("gumd: noise " + shape_str(noise.shape()) + " vs logits " + shape_str(logits.shape()));
    }
    z = add(z, noise);
  }
  Tensor soft = softmax(scale(z, 1.0 / tau), 0);
  if (!hard) return soft;
  const std::size_t L = soft.dim(0), D = soft.dim(1);
  auto w = soft.data();
  std::vector<double> onehot(L * D, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < L; ++l)
      if (w[l * D + d] > w[best * D + d]) best = l;
    onehot[best * D + d] = 1.0;
  }
  return straight_through(soft, Tensor::from({L, D}, std::move(onehot)));
}

Tensor gumd_forward(const Tensor& h, const Tensor& logits, double tau, bool hard, const Tensor& noise) {
  if (h.rank() != 3 || logits.rank() != 2 || logits.dim(0) != h.dim(0) || logits.dim(1) != h.dim(2)) {
    throw ShapeError("gumd_forward: logits " + shape_str(logits.shape()) + " do not match hidden states " +
                     shape_str(h.shape()));
  }
  return layer_mix(h, gumd_weights(logits, noise, tau, hard));
}

Tensor gumd_forward(const Tensor& h, const Tensor& logits, double tau, bool hard, std::uint64_t rng_seed) {
  return gumd_forward(h, logits, tau, hard, sample_gumbel(logits.shape(), rng_seed));
}

Tensor concat_project(std::span<const Tensor> features, const Tensor& weight, const Tensor& bias) {
  if (features.empty()) throw std::invalid_argument("concat_project: no features");
  for (const auto& f : features) {
    if (f.rank() != 2 || f.dim(0) != features.front().dim(0)) {
      throw ShapeError("concat_project: frame-count mismatch " + shape_str(features.front().shape()) + " vs " +
                       shape_str(f.shape()));
    }
  }
  Tensor x = features.size() == 1 ? features.front() : concat_last(features);
  return add(matmul(x, weight), bias);
}

std::vector<HConvStage> hconv_schedule(std::size_t layers, std::size_t channels, std::size_t hidden,
                                       std::size_t output_dim, std::size_t kernel, std::size_t stride) {
  if (layers < 1) throw std::invalid_argument("hconv: need at least one layer");
  const std::size_t padding = stride >= 2 ? (kernel - 1) / 2 : 0;
  std::vector<HConvStage> stages;
  std::size_t n = layers, c = channels;
  do {
    if (kernel > n + 2 * padding) {
      throw std::invalid_argument("hconv: kernel " + std::to_string(kernel) + " longer than padded layer axis " +
                                  std::to_string(n + 2 * padding) + " (layers=" + std::to_string(layers) +
                                  ", stride=" + std::to_string(stride) + ")");
    }
    const std::size_t next = conv_output_length(n, kernel, stride, padding);
    if (n > 1 && next >= n) {
      throw std::invalid_argument("hconv: schedule stalls at length " + std::to_string(n));
    }
    const std::size_t out = next == 1 ? output_dim : hidden;
    stages.push_back({n, next, padding, c, out});
    n = next;
    c = out;
  } while (n > 1);
  return stages;
}

Tensor hconv_forward(const Tensor& merged, std::span<const Tensor> params, std::span<const HConvStage> stages,
                     std::size_t stride) {
  if (merged.rank() != 3) throw ShapeError("hconv_forward: merged stack must be L×T×C, got " + shape_str(merged.shape()));
  if (params.size() != 4 * stages.size()) throw std::invalid_argument("hconv_forward: parameter count mismatch");
  if (stages.empty() || merged.dim(0) != stages.front().in_length || merged.dim(2) != stages.front().in_channels) {
    throw ShapeError("hconv_forward: stack " + shape_str(merged.shape()) + " does not match the stage schedule");
  }
  const std::size_t frames = merged.dim(1);
  Tensor x = merged;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& st = stages[i];
    Tensor y = conv1d_seq(x, params[4 * i], stride, st.padding);
    y = gelu(add(y, params[4 * i + 1]));
    y = reshape(y, {st.out_length * frames, st.in_channels});
    y = add(matmul(y, params[4 * i + 2]), params[4 * i + 3]);
    x = reshape(y, {st.out_length, frames, st.out_channels});
  }
  return reshape(x, {frames, stages.back().out_channels});
}

namespace {

Tensor uniform_init(Rng& rng, Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

bool uses_projection(const InterfaceConfig& c, const std::vector<std::size_t>& dims) {
  if (c.kind != InterfaceKind::ws && c.kind != InterfaceKind::gumd) return false;
  return dims.size() > 1 || dims.front() != c.output_dim;
}

}  // namespace

Interface Interface::build(const InterfaceConfig& config, std::size_t n_models, std::size_t layers,
                           std::vector<std::size_t> input_dims) {
  config.validate();
  if (n_models == 0) {
    throw std::invalid_argument(std::string("build_interface: ") + to_string(config.kind) + " needs at least one model");
  }
  if (input_dims.size() != n_models) throw std::invalid_argument("build_interface: one input dim per model required");
  if (layers == 0) throw std::invalid_argument("build_interface: layers must be positive");
  for (auto d : input_dims)
    if (d == 0) throw std::invalid_argument("build_interface: input dims must be positive");

  Interface iface;
  iface.config_ = config;
  iface.layers_ = layers;
  iface.input_dims_ = std::move(input_dims);
  iface.noise_rng_ = Rng(config.rng_seed).split(2);
  Rng rng = Rng(config.rng_seed).split(1);
  const auto& dims = iface.input_dims_;
  auto& ps = iface.params_;

  switch (config.kind) {
    case InterfaceKind::ws:
      for (std::size_t i = 0; i < n_models; ++i)
        ps.push_back({"ws." + std::to_string(i) + ".logits", Tensor::zeros({layers}, true)});
      break;
    case InterfaceKind::gumd:
      for (std::size_t i = 0; i < n_models; ++i)
        ps.push_back({"gumd." + std::to_string(i) + ".logits", Tensor::zeros({layers, dims[i]}, true)});
      break;
    case InterfaceKind::hconv:
    case InterfaceKind::chconv: {
      std::size_t channels = dims.front();
      if (config.kind == InterfaceKind::hconv) {
        for (auto d : dims) {
          if (d != dims.front()) {
            throw std::invalid_argument("build_interface: hconv adds stacks and needs equal dims; match them with "
                                        "dim_rule=interpolate_to_max");
          }
        }
      } else {
        channels = 0;
        for (auto d : dims) channels += d;
      }
      const std::size_t hidden = config.hconv_channels ? config.hconv_channels : config.output_dim;
      iface.stages_ = hconv_schedule(layers, channels, hidden, config.output_dim, config.hconv_kernel,
                                     config.hconv_stride);
      const std::size_t K = config.hconv_kernel;
      for (std::size_t i = 0; i < iface.stages_.size(); ++i) {
        const auto& st = iface.stages_[i];
        const std::string p = "stage" + std::to_string(i);
        const std::size_t c = st.in_channels;
        ps.push_back({p + ".conv.weight", uniform_init(rng, {c, c, K}, c * K)});
        ps.push_back({p + ".conv.bias", Tensor::zeros({c}, true)});
        ps.push_back({p + ".mix.weight", uniform_init(rng, {c, st.out_channels}, c)});
        ps.push_back({p + ".mix.bias", Tensor::zeros({st.out_channels}, true)});
      }
      break;
    }
  }
  if (uses_projection(config, dims)) {
    std::size_t total = 0;
    for (auto d : dims) total += d;
    ps.push_back({"proj.weight", uniform_init(rng, {total, config.output_dim}, total)});
    ps.push_back({"proj.bias", Tensor::zeros({config.output_dim}, true)});
  }
  return iface;
}

Tensor& Interface::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p.value;
  throw std::out_of_range("interface has no parameter '" + name + "'");
}

std::size_t Interface::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void Interface::check_stacks(std::span<const Tensor> stacks) const {
  if (stacks.size() != n_models()) {
    throw std::invalid_argument("interface expects " + std::to_string(n_models()) + " stacks, got " +
                                std::to_string(stacks.size()));
  }
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    const auto& s = stacks[i];
    if (s.rank() != 3 || s.dim(0) != layers_ || s.dim(2) != input_dims_[i] || s.dim(1) != stacks.front().dim(1)) {
      throw ShapeError("interface stack " + std::to_string(i) + " has shape " + shape_str(s.shape()) + ", expected [" +
                       std::to_string(layers_) + ",T," + std::to_string(input_dims_[i]) + "]");
    }
  }
}

Tensor Interface::fuse_per_model(std::span<const Tensor> stacks, std::span<const Tensor> noise, bool hard) const {
  std::vector<Tensor> feats;
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    const Tensor& logits = params_[i].value;
    if (config_.kind == InterfaceKind::ws) {
      feats.push_back(ws_forward(stacks[i], logits));
    } else {
      feats.push_back(gumd_forward(stacks[i], logits, config_.gumbel_tau, hard, noise.empty() ? Tensor() : noise[i]));
    }
  }
  if (!uses_projection(config_, input_dims_)) return feats.front();
  const std::size_t n = params_.size();
  return concat_project(feats, params_[n - 2].value, params_[n - 1].value);
}

Tensor Interface::forward(std::span<const Tensor> stacks, Mode mode) {
  check_stacks(stacks);
  switch (config_.kind) {
    case InterfaceKind::ws: return fuse_per_model(stacks, {}, false);
    case InterfaceKind::gumd:
      if (mode == Mode::train) {
        auto noise = sample_noise();
        return fuse_per_model(stacks, noise, config_.gumbel_hard_train);
      }
      return fuse_per_model(stacks, {}, config_.gumbel_hard_eval);
    case InterfaceKind::hconv:
    case InterfaceKind::chconv: {
      Tensor merged = config_.kind == InterfaceKind::hconv ? merge_add(stacks) : merge_concat(stacks);
      std::vector<Tensor> ps;
      for (const auto& p : params_) ps.push_back(p.value);
      return hconv_forward(merged, ps, stages_, config_.hconv_stride);
    }
  }
  throw std::logic_error("unreachable interface kind");
}

Tensor Interface::forward_gumd(std::span<const Tensor> stacks, std::span<const Tensor> noise, bool hard) const {
  if (config_.kind != InterfaceKind::gumd) throw std::logic_error("forward_gumd on a non-gumd interface");
  check_stacks(stacks);
  if (!noise.empty() && noise.size() != stacks.size()) throw std::invalid_argument("forward_gumd: one noise tensor per model");
  return fuse_per_model(stacks, noise, hard);
}

std::vector<Tensor> Interface::sample_noise() {
  std::vector<Tensor> noise;
  for (auto d : input_dims_) noise.push_back(sample_gumbel({layers_, d}, noise_rng_));
  return noise;
}

}  // namespace fusionkit
