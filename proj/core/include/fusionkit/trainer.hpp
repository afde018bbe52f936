#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fusionkit/checkpoint.hpp"
#include "fusionkit/heads.hpp"
#include "fusionkit/interfaces.hpp"
#include "fusionkit/matcher.hpp"
#include "fusionkit/metrics.hpp"
#include "fusionkit/optim.hpp"
#include "fusionkit/synth.hpp"

namespace fusionkit {

enum class TaskKind { ctc, classify, verify };

const char* to_string(TaskKind k);
TaskKind parse_task_kind(const std::string& s);
const char* metric_name(TaskKind k);
HeadKind head_kind(TaskKind k);

struct TaskSpec {
  TaskKind kind = TaskKind::classify;
  std::size_t n_items = 1000;
  std::size_t input_len = 80;
  std::size_t features = 8;
  std::uint32_t input_rate_hz = 1000;
  std::optional<std::uint64_t> data_seed;  // defaults to the training seed
  double noise = 0.5;
  double distractor = 1.0;
  double bit_prior = 0.3;          // classify
  std::size_t vocab_size = 4;      // ctc
  std::size_t symbol_width = 2;    // ctc
  std::size_t segment_frames = 2;  // ctc
  std::size_t gap_frames = 1;      // ctc
  std::size_t speakers = 8;        // verify
  double channel = 0.5;            // verify
  std::size_t embed_dim = 16;      // verify

  bool operator==(const TaskSpec&) const = default;
};

struct TrainSettings {
  std::size_t steps = 1000;
  std::size_t batch_size = 16;
  AdamOptions adam;
  std::size_t eval_every = 500;  // 0: evaluate only at the end
  std::size_t log_every = 50;
  std::uint64_t seed = 0;
  std::size_t debug_nan_step = 0;  // 1-based step whose loss is forced to NaN; 0 disables

  bool operator==(const TrainSettings&) const = default;
};

struct ExperimentConfig {
  std::vector<EncoderSpec> encoders;
  InterfaceConfig interface;  // output_dim 0: largest encoder dim; rng_seed derived from train.seed
  DimRule dim_rule = DimRule::require_equal;
  TaskSpec task;
  TrainSettings train;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Encoder model ids joined by '+', e.g. "A+B".
std::string combo_name(const ExperimentConfig& cfg);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct LossPoint {
  std::size_t step;
  double loss;
};

struct RunResult {
  std::string digest;
  std::string combo;
  InterfaceKind interface_kind = InterfaceKind::ws;
  std::size_t n_models = 0;
  std::uint64_t seed = 0;
  std::vector<EvalReport> reports;  // one per split: train, dev, test
  std::vector<LossPoint> loss_curve;
  std::vector<std::pair<std::size_t, double>> dev_curve;
  std::vector<std::pair<std::size_t, std::vector<int>>> transcripts;  // ctc: greedy decodes of the test split
  std::size_t param_count = 0;  // interface only
  std::size_t head_param_count = 0;
  double wall_seconds = 0.0;
  std::vector<std::uint64_t> encoder_hash_before, encoder_hash_after;
  Checkpoint checkpoint;

  const EvalReport& report(Split split) const;
};

/// Fills defaults that depend on other sections and checks consistency;
/// throws std::invalid_argument.
ExperimentConfig resolve(const ExperimentConfig& cfg);

SynthDataset make_dataset(const ExperimentConfig& resolved);
std::vector<SynthEncoder> make_encoders(const ExperimentConfig& resolved);

/// Trains interface + head on frozen encoders and evaluates every split.
RunResult train(const ExperimentConfig& cfg);
RunResult train(const ExperimentConfig& cfg, std::span<const SynthEncoder> encoders, const SynthDataset& data);

/// Writes report.csv, losscurve.csv, checkpoint.ifc, config.txt and (ctc)
/// transcripts.txt under
/// out_dir/<digest>/ and returns that directory.
std::filesystem::path persist(const RunResult& result, const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace fusionkit
