#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fusionkit/interfaces.hpp"
#include "fusionkit/tensor.hpp"

namespace fusionkit {

inline constexpr int kBlank = 0;

/// Smallest frame count that can emit `labels` under CTC (one extra blank
/// between each pair of equal neighbours).
std::size_t ctc_min_frames(std::span<const int> labels);

/// Negative log-likelihood of `labels` (symbols 1..V) summed over all CTC
/// alignments of a T×(V+1) log-probability matrix. Computed in log space.
Tensor ctc_loss(const Tensor& logprobs, std::span<const int> labels);

/// Per-frame argmax, repeats collapsed, blanks dropped.
std::vector<int> ctc_greedy_decode(const Tensor& logprobs);

/// "item_id<TAB>s1 s2 ..." for one decoded utterance.
std::string format_transcript(const std::string& item_id, std::span<const int> symbols);

/// log_softmax(mean_t(feat) · W + b) for a single T×D item.
Tensor classify_forward(const Tensor& feat, const Tensor& weight, const Tensor& bias);

/// l2_normalize(mean_t(feat) · W + b) for a single T×D item.
Tensor embed_utterance(const Tensor& feat, const Tensor& weight, const Tensor& bias);

double cosine_score(std::span<const double> e1, std::span<const double> e2);

enum class HeadKind { ctc, classify, verify };

const char* to_string(HeadKind k);

struct HeadConfig {
  HeadKind kind = HeadKind::classify;
  std::size_t input_dim = 8;
  /// Vocabulary size V (ctc), class count (classify) or training speaker
  /// count (verify).
  std::size_t classes = 2;
  std::size_t embed_dim = 16;  // verify only
  std::uint64_t rng_seed = 0;
};

struct BatchTargets {
  std::vector<std::vector<int>> sequences;  // ctc
  std::vector<int> labels;                  // classify / verify speaker ids
};

/// Downstream model over batched features laid out (B·T)×D, item-major.
class Head {
 public:
  static Head build(const HeadConfig& config);

  const HeadConfig& config() const { return config_; }
  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  std::size_t param_count() const;

  /// Mean training loss over the batch.
  Tensor loss(const Tensor& feat, std::size_t batch, const BatchTargets& targets) const;

  /// (B·T)×(V+1) per-frame log-probabilities (ctc).
  Tensor frame_logprobs(const Tensor& feat) const;
  /// B×C class log-probabilities (classify).
  Tensor class_logprobs(const Tensor& feat, std::size_t batch) const;
  /// B×E unit embeddings (verify).
  Tensor embeddings(const Tensor& feat, std::size_t batch) const;

 private:
  Tensor pooled(const Tensor& feat, std::size_t batch) const;

  HeadConfig config_;
  std::vector<NamedParam> params_;
};

}  // namespace fusionkit
