#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fusionkit/bundle.hpp"
#include "fusionkit/tensor.hpp"

namespace fusionkit {

enum class Specialization { generic, group_a, group_b };

const char* to_string(Specialization s);
Specialization parse_specialization(const std::string& s);

struct EncoderSpec {
  std::string model_id = "enc";
  std::uint64_t seed = 0;
  std::size_t layers = 12;  // blocks; bundles carry layers + 1 states
  std::size_t dim = 8;
  std::uint32_t framerate_hz = 50;
  std::uint32_t input_rate_hz = 1000;
  std::size_t input_features = 8;
  Specialization specialization = Specialization::generic;
  /// Feature block j (tap_width columns, from the left) bypasses the trunk
  /// and is injected into hidden state taps[j] only.
  std::vector<std::size_t> taps;
  std::size_t tap_width = 0;

  bool operator==(const EncoderSpec&) const = default;
};

/// Raw-input row ranges [begin, end) pooled into each output frame.
std::vector<std::pair<std::size_t, std::size_t>> frame_windows(std::size_t input_len, std::uint32_t input_rate_hz,
                                                               std::uint32_t framerate_hz);

/// Frozen, seeded stand-in for a pretrained speech encoder.
///
/// Hidden state 0 is a linear projection of the input pooled to the output
/// framerate; state l applies l rounds of a fixed near-orthogonal mixing
/// followed by tanh. `group_a` replaces the second half of the input
/// features by a fixed random projection orthogonal to their mean, which
/// removes the group's mean (its signal) entirely; `group_b` does the same
/// to the first half.
class SynthEncoder {
 public:
  explicit SynthEncoder(EncoderSpec spec);

  const EncoderSpec& spec() const { return spec_; }
  std::size_t states() const { return spec_.layers + 1; }
  std::size_t frames_for(std::size_t input_len) const;

  /// x is T'×F. The result is rounded to float32 so it survives the bundle
  /// format unchanged.
  HiddenStateBundle encode(const Tensor& x) const;

  /// Serialized weight stack, for bit-identity checks.
  std::vector<std::uint8_t> weight_bytes() const;

 private:
  EncoderSpec spec_;
  std::size_t trunk_features_;
  std::vector<double> scramble_;   // k×k, empty for generic
  std::vector<double> in_proj_;    // trunk_features × D
  std::vector<double> in_bias_;    // D
  std::vector<std::vector<double>> mix_;       // layers × (D×D)
  std::vector<std::vector<double>> mix_bias_;  // layers × D
  std::vector<std::vector<double>> tap_proj_;  // taps × (tap_width × D)
};

enum class DatasetKind { ctc_strings, classify_xor, verify_pairs };
enum class Split { train, dev, test };

const char* to_string(DatasetKind k);
const char* to_string(Split s);

/// Deterministic 80/10/10 assignment from a hash of the item index.
Split split_of(std::size_t index, std::uint64_t seed);

struct SynthItem {
  Tensor input;              // T'×F
  std::vector<int> symbols;  // ctc_strings: label sequence over 1..V
  int label = -1;            // classify_xor: 0/1; verify_pairs: speaker id
};

struct SynthDataset {
  DatasetKind kind = DatasetKind::classify_xor;
  std::uint64_t seed = 0;
  std::size_t input_len = 0;
  std::size_t features = 0;
  std::uint32_t input_rate_hz = 1000;
  std::size_t n_classes = 0;  // classes, vocabulary size, or speaker count
  std::vector<SynthItem> items;

  std::vector<std::size_t> indices(Split split) const;
};

struct XorTaskOptions {
  double bit_prior = 0.3;   // P(group bit = 1)
  double noise = 0.5;       // per raw sample
  double distractor = 1.0;  // zero-mean per-item pattern inside each group
  std::uint32_t input_rate_hz = 1000;
};

/// Items whose two feature halves each carry one bit as the sign of the
/// group mean; the label is the XOR of the two bits.
SynthDataset make_xor_dataset(std::uint64_t seed, std::size_t n_items, std::size_t input_len, std::size_t features,
                              const XorTaskOptions& options = {});

struct ComplementaryOptions {
  std::size_t layers = 12;
  std::size_t dim = 16;
  std::uint32_t framerate_hz = 50;
  XorTaskOptions task;
};

struct ComplementaryTask {
  SynthDataset data;
  SynthEncoder a;  // sees group 1, blind to group 2
  SynthEncoder b;  // sees group 2, blind to group 1
};

ComplementaryTask make_complementary_task(std::uint64_t seed, std::size_t n_items, std::size_t input_len,
                                          std::size_t features, const ComplementaryOptions& options = {});

struct CtcTaskOptions {
  double noise = 0.3;
  double distractor = 1.0;
  std::size_t symbol_width = 2;    // features per symbol block
  std::size_t segment_frames = 2;  // output frames per symbol
  std::size_t gap_frames = 1;      // silent frames after each symbol
  std::uint32_t input_rate_hz = 1000;
  std::uint32_t framerate_hz = 50;
};

/// Symbol strings rendered as disjoint feature blocks (symbol k lights up
/// block k-1) separated by silence; features past the symbol blocks carry
/// per-frame distractor noise.
SynthDataset make_ctc_task(std::uint64_t seed, std::size_t n_items, std::size_t vocab_size, std::size_t input_len,
                           std::size_t features, const CtcTaskOptions& options = {});

struct VerifyTaskOptions {
  std::size_t speakers = 8;
  double channel = 0.5;  // per-utterance offset
  double noise = 1.0;    // per raw sample
  std::uint32_t input_rate_hz = 1000;
};

SynthDataset make_verify_task(std::uint64_t seed, std::size_t n_items, std::size_t input_len, std::size_t features,
                              const VerifyTaskOptions& options = {});

}  // namespace fusionkit
