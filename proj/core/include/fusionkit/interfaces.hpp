#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fusionkit/random.hpp"
#include "fusionkit/tensor.hpp"

namespace fusionkit {

enum class InterfaceKind { ws, gumd, hconv, chconv };

const char* to_string(InterfaceKind k);
InterfaceKind parse_interface_kind(const std::string& s);

struct InterfaceConfig {
  InterfaceKind kind = InterfaceKind::ws;
  std::size_t output_dim = 8;
  std::size_t hconv_kernel = 3;
  std::size_t hconv_stride = 2;
  std::size_t hconv_channels = 0;  // 0 means output_dim
  double gumbel_tau = 1.0;
  bool gumbel_hard_train = true;   // straight-through during training
  bool gumbel_hard_eval = true;    // noiseless argmax at evaluation
  std::uint64_t rng_seed = 0;

  bool operator==(const InterfaceConfig&) const = default;
  void validate() const;
};

enum class Mode { train, eval };

struct NamedParam {
  std::string name;
  Tensor value;
};

// Building blocks, usable on their own.

/// out[t,d] = Σ_l softmax(logits)[l] · h[l,t,d].
Tensor ws_forward(const Tensor& h, const Tensor& logits);

/// Per-dimension layer weights softmax((logits + noise) / tau) over the layer
/// axis; `hard` replaces the forward value by the per-column one-hot argmax
/// (ties to the lowest layer) while keeping the soft gradient. An undefined
/// `noise` tensor means no noise.
Tensor gumd_weights(const Tensor& logits, const Tensor& noise, double tau, bool hard);
Tensor gumd_forward(const Tensor& h, const Tensor& logits, double tau, bool hard, const Tensor& noise);
Tensor gumd_forward(const Tensor& h, const Tensor& logits, double tau, bool hard, std::uint64_t rng_seed);

/// Concatenates T×D_i features and applies an affine map to D.
Tensor concat_project(std::span<const Tensor> features, const Tensor& weight, const Tensor& bias);

struct HConvStage {
  std::size_t in_length, out_length, padding;
  std::size_t in_channels, out_channels;
};

/// Stage geometry for a layer axis of length `layers`. Stride ≥ 2 uses
/// padding (K-1)/2; stride 1 uses none. Throws if the schedule cannot
/// reach length 1.
std::vector<HConvStage> hconv_schedule(std::size_t layers, std::size_t channels, std::size_t hidden,
                                       std::size_t output_dim, std::size_t kernel, std::size_t stride);

/// Hierarchical convolution over the layer axis of an L×T×C stack; each
/// frame is processed independently. `params` holds, per stage, conv
/// weight (C×C×K), conv bias, mix weight (C×C'), mix bias.
Tensor hconv_forward(const Tensor& merged, std::span<const Tensor> params, std::span<const HConvStage> stages,
                     std::size_t stride);

/// Trainable fusion module mapping N matched stacks (L×T×D_i) to T×D.
class Interface {
 public:
  static Interface build(const InterfaceConfig& config, std::size_t n_models, std::size_t layers,
                         std::vector<std::size_t> input_dims);

  const InterfaceConfig& config() const { return config_; }
  std::size_t n_models() const { return input_dims_.size(); }
  std::size_t layers() const { return layers_; }
  const std::vector<std::size_t>& input_dims() const { return input_dims_; }
  const std::vector<HConvStage>& stages() const { return stages_; }

  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  Tensor& param(const std::string& name);
  std::size_t param_count() const;

  /// Training mode draws fresh Gumbel noise from the interface's own
  /// generator (GumD only); evaluation is deterministic.
  Tensor forward(std::span<const Tensor> stacks, Mode mode);

  /// GumD with caller-supplied noise (one L×D_i tensor per model) and an
  /// explicit hard/soft choice.
  Tensor forward_gumd(std::span<const Tensor> stacks, std::span<const Tensor> noise, bool hard) const;

  std::vector<Tensor> sample_noise();

 private:
  Tensor fuse_per_model(std::span<const Tensor> stacks, std::span<const Tensor> noise, bool hard) const;
  void check_stacks(std::span<const Tensor> stacks) const;

  InterfaceConfig config_;
  std::size_t layers_ = 0;
  std::vector<std::size_t> input_dims_;
  std::vector<HConvStage> stages_;
  std::vector<NamedParam> params_;
  Rng noise_rng_{0};
};

}  // namespace fusionkit
