#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fusionkit/bundle.hpp"
#include "fusionkit/tensor.hpp"

namespace fusionkit {

struct ProbeOptions {
  std::size_t hidden = 0;  // 0: linear probe; otherwise one GELU hidden layer
  std::size_t steps = 1500;
  std::size_t batch = 64;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  double accuracy = 0.0;
  /// Mean per-class recall; 1/C for a probe that ignores its input.
  double balanced_accuracy = 0.0;
};

/// Fits a softmax probe on standardized rows of X (N×F) and scores it on
/// the held-out rows.
ProbeResult train_probe(const Tensor& X, std::span<const int> labels, std::size_t n_classes,
                        std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows,
                        const ProbeOptions& options = {});

/// Time-averaged hidden state of one layer (D values), or of every layer
/// concatenated (L·D values) when `layer` is negative.
std::vector<double> pooled_features(const HiddenStateBundle& bundle, int layer);

}  // namespace fusionkit
