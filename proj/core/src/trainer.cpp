#include "fusionkit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "fusionkit/config.hpp"
#include "fusionkit/ops.hpp"
#include "text_util.hpp"

namespace fusionkit {

const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::ctc: return "ctc";
    case TaskKind::classify: return "classify";
    case TaskKind::verify: return "verify";
  }
  return "classify";
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "ctc") return TaskKind::ctc;
  if (s == "classify") return TaskKind::classify;
  if (s == "verify") return TaskKind::verify;
  throw std::invalid_argument("unknown task kind '" + s + "' (expected ctc, classify or verify)");
}

const char* metric_name(TaskKind k) {
  switch (k) {
    case TaskKind::ctc: return "cer";
    case TaskKind::classify: return "accuracy";
    case TaskKind::verify: return "eer";
  }
  return "accuracy";
}

HeadKind head_kind(TaskKind k) {
  switch (k) {
    case TaskKind::ctc: return HeadKind::ctc;
    case TaskKind::classify: return HeadKind::classify;
    case TaskKind::verify: return HeadKind::verify;
  }
  return HeadKind::classify;
}

std::string combo_name(const ExperimentConfig& cfg) {
  std::string s;
  for (std::size_t i = 0; i < cfg.encoders.size(); ++i) {
    if (i) s += '+';
    s += cfg.encoders[i].model_id;
  }
  return s;
}

const EvalReport& RunResult::report(Split split) const {
  const std::string suffix = std::string("/") + to_string(split);
  for (const auto& r : reports)
    if (r.task.size() >= suffix.size() && r.task.compare(r.task.size() - suffix.size(), suffix.size(), suffix) == 0)
      return r;
  throw std::out_of_range("run has no report for split " + std::string(to_string(split)));
}

ExperimentConfig resolve(const ExperimentConfig& in) {
  ExperimentConfig cfg = in;
  if (cfg.encoders.empty()) throw std::invalid_argument("experiment needs at least one encoder");
  if (cfg.train.steps == 0) throw std::invalid_argument("train.steps must be positive");
  if (cfg.train.batch_size == 0) throw std::invalid_argument("train.batch_size must be positive");
  std::size_t max_dim = 0;
  for (auto& e : cfg.encoders) {
    e.input_features = cfg.task.features;
    e.input_rate_hz = cfg.task.input_rate_hz;
    max_dim = std::max(max_dim, e.dim);
  }
  if (cfg.interface.output_dim == 0) cfg.interface.output_dim = max_dim;
  cfg.interface.rng_seed = splitmix64(cfg.train.seed ^ 0x1f7e5a11ULL);
  if (!cfg.task.data_seed) cfg.task.data_seed = cfg.train.seed;
  return cfg;
}

SynthDataset make_dataset(const ExperimentConfig& cfg) {
  const auto& t = cfg.task;
  const std::uint64_t seed = t.data_seed.value_or(cfg.train.seed);
  switch (t.kind) {
    case TaskKind::classify: {
      XorTaskOptions o;
      o.bit_prior = t.bit_prior;
      o.noise = t.noise;
      o.distractor = t.distractor;
      o.input_rate_hz = t.input_rate_hz;
      return make_xor_dataset(seed, t.n_items, t.input_len, t.features, o);
    }
    case TaskKind::ctc: {
      CtcTaskOptions o;
      o.noise = t.noise;
      o.distractor = t.distractor;
      o.symbol_width = t.symbol_width;
      o.segment_frames = t.segment_frames;
      o.gap_frames = t.gap_frames;
      o.input_rate_hz = t.input_rate_hz;
      o.framerate_hz = 0;
      for (const auto& e : cfg.encoders) o.framerate_hz = std::max(o.framerate_hz, e.framerate_hz);
      return make_ctc_task(seed, t.n_items, t.vocab_size, t.input_len, t.features, o);
    }
    case TaskKind::verify: {
      VerifyTaskOptions o;
      o.speakers = t.speakers;
      o.channel = t.channel;
      o.noise = t.noise;
      o.input_rate_hz = t.input_rate_hz;
      return make_verify_task(seed, t.n_items, t.input_len, t.features, o);
    }
  }
  throw std::logic_error("unreachable task kind");
}

std::vector<SynthEncoder> make_encoders(const ExperimentConfig& cfg) {
  std::vector<SynthEncoder> out;
  for (const auto& e : cfg.encoders) out.emplace_back(e);
  return out;
}

namespace {

std::uint64_t hash_bytes(const std::vector<std::uint8_t>& b) {
  return detail::fnv1a64(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

// Matched hidden states of every item, per model, item-major.
struct FeatureStore {
  std::size_t layers = 0, frames = 0;
  std::vector<std::size_t> dims;
  std::vector<std::vector<double>> data;  // [model][item][L][T][D]

  std::vector<Tensor> batch(std::span<const std::size_t> items) const {
    std::vector<Tensor> out;
    const std::size_t B = items.size();
    for (std::size_t m = 0; m < dims.size(); ++m) {
      const std::size_t D = dims[m], item_size = layers * frames * D, block = frames * D;
      std::vector<double> buf(layers * B * block);
      for (std::size_t l = 0; l < layers; ++l)
        for (std::size_t b = 0; b < B; ++b) {
          const double* src = &data[m][items[b] * item_size + l * block];
          std::copy(src, src + block, &buf[(l * B + b) * block]);
        }
      out.push_back(Tensor::from({layers, B * frames, D}, std::move(buf)));
    }
    return out;
  }
};

FeatureStore encode_all(std::span<const SynthEncoder> encoders, const SynthDataset& data, const MatchPolicy& policy) {
  FeatureStore fs;
  fs.data.resize(encoders.size());
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    std::vector<HiddenStateBundle> raw;
    for (const auto& e : encoders) raw.push_back(e.encode(data.items[i].input));
    auto matched = match_bundles(raw, policy);
    if (i == 0) {
      fs.layers = matched.front().layers();
      fs.frames = matched.front().frames();
      for (const auto& b : matched) fs.dims.push_back(b.dim());
    }
    for (std::size_t m = 0; m < matched.size(); ++m) {
      auto d = matched[m].data.data();
      fs.data[m].insert(fs.data[m].end(), d.begin(), d.end());
    }
  }
  return fs;
}

BatchTargets targets_for(const SynthDataset& data, std::span<const std::size_t> items) {
  BatchTargets t;
  for (auto i : items) {
    t.sequences.push_back(data.items[i].symbols);
    t.labels.push_back(data.items[i].label);
  }
  return t;
}

EvalReport evaluate(Interface& iface, const Head& head, const FeatureStore& fs, const SynthDataset& data,
                    TaskKind task, Split split, std::uint64_t seed,
                    std::vector<std::pair<std::size_t, std::vector<int>>>* transcripts = nullptr) {
  NoGradGuard no_grad;
  const auto idx = data.indices(split);
  EvalReport rep;
  rep.task = std::string(to_string(task)) + "/" + to_string(split);
  rep.metric = metric_name(task);
  rep.n_items = idx.size();
  rep.seed = seed;
  if (idx.empty()) {
    rep.value = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  constexpr std::size_t kChunk = 256;
  std::vector<int> preds, labels;
  std::vector<std::vector<int>> hyps, refs;
  std::vector<std::vector<double>> embeds;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    std::span<const std::size_t> items(idx.data() + start, std::min(kChunk, idx.size() - start));
    auto stacks = fs.batch(items);
    Tensor feat = iface.forward(stacks, Mode::eval);
    const std::size_t B = items.size();
    switch (task) {
      case TaskKind::classify: {
        Tensor lp = head.class_logprobs(feat, B);
        const std::size_t C = lp.dim(1);
        for (std::size_t b = 0; b < B; ++b) {
          const double* row = &lp.data()[b * C];
          preds.push_back(static_cast<int>(std::max_element(row, row + C) - row));
          labels.push_back(data.items[items[b]].label);
        }
        break;
      }
      case TaskKind::ctc: {
        Tensor lp = head.frame_logprobs(feat);
        for (std::size_t b = 0; b < B; ++b) {
          hyps.push_back(ctc_greedy_decode(slice_rows(lp, b * fs.frames, fs.frames)));
          if (transcripts) transcripts->emplace_back(items[b], hyps.back());
          refs.push_back(data.items[items[b]].symbols);
        }
        break;
      }
      case TaskKind::verify: {
        Tensor e = head.embeddings(feat, B);
        const std::size_t E = e.dim(1);
        for (std::size_t b = 0; b < B; ++b) {
          embeds.emplace_back(e.data().begin() + static_cast<std::ptrdiff_t>(b * E),
                              e.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * E));
          labels.push_back(data.items[items[b]].label);
        }
        break;
      }
    }
  }
  switch (task) {
    case TaskKind::classify: rep.value = accuracy(preds, labels); break;
    case TaskKind::ctc: rep.value = cer(hyps, refs); break;
    case TaskKind::verify: {
      std::vector<double> pos, neg;
      for (std::size_t i = 0; i < embeds.size(); ++i)
        for (std::size_t j = i + 1; j < embeds.size(); ++j)
          (labels[i] == labels[j] ? pos : neg).push_back(cosine_score(embeds[i], embeds[j]));
      rep.value = pos.empty() || neg.empty() ? std::numeric_limits<double>::quiet_NaN() : eer(pos, neg);
      break;
    }
  }
  return rep;
}

std::vector<Tensor> all_params(Interface& iface, Head& head) {
  std::vector<Tensor> ps;
  for (auto& p : iface.parameters()) ps.push_back(p.value);
  for (auto& p : head.parameters()) ps.push_back(p.value);
  return ps;
}

}  // namespace

RunResult train(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = resolve(cfg_in);
  const auto encoders = make_encoders(cfg);
  const auto data = make_dataset(cfg);
  return train(cfg_in, encoders, data);
}

RunResult train(const ExperimentConfig& cfg_in, std::span<const SynthEncoder> encoders, const SynthDataset& data) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = resolve(cfg_in);
  if (encoders.size() != cfg.encoders.size()) throw std::invalid_argument("train: encoder count does not match config");

  RunResult res;
  res.digest = config_digest(cfg);
  res.combo = combo_name(cfg);
  res.interface_kind = cfg.interface.kind;
  res.n_models = encoders.size();
  res.seed = cfg.train.seed;
  for (const auto& e : encoders) res.encoder_hash_before.push_back(hash_bytes(e.weight_bytes()));
  const auto frozen_bytes = [&] {
    std::vector<std::vector<std::uint8_t>> b;
    for (const auto& e : encoders) b.push_back(e.weight_bytes());
    return b;
  }();

  MatchPolicy policy;
  policy.dim_rule = cfg.dim_rule;
  const FeatureStore fs = encode_all(encoders, data, policy);

  Interface iface = Interface::build(cfg.interface, fs.dims.size(), fs.layers, fs.dims);
  HeadConfig hc;
  hc.kind = head_kind(cfg.task.kind);
  hc.input_dim = cfg.interface.output_dim;
  hc.classes = data.n_classes;
  hc.embed_dim = cfg.task.embed_dim;
  hc.rng_seed = splitmix64(cfg.train.seed ^ 0x4ead5eedULL);
  Head head = Head::build(hc);
  res.param_count = iface.param_count();
  res.head_param_count = head.param_count();

  auto params = all_params(iface, head);
  OptimizerState opt = make_adam_state(params, cfg.train.adam);
  const auto train_idx = data.indices(Split::train);
  if (train_idx.empty()) throw std::invalid_argument("train: training split is empty");
  Rng batch_rng = Rng(cfg.train.seed).split(7);

  const std::size_t B = cfg.train.batch_size;
  std::vector<std::size_t> items(B);
  for (std::size_t step = 1; step <= cfg.train.steps; ++step) {
    for (auto& it : items) it = train_idx[batch_rng.below(train_idx.size())];
    auto stacks = fs.batch(items);
    Tensor feat = iface.forward(stacks, Mode::train);
    Tensor loss = head.loss(feat, B, targets_for(data, items));
    double value = loss.item();
    if (cfg.train.debug_nan_step == step) value = std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(value)) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": loss is " +
                                std::to_string(value) + " (" + combo_name(cfg) + ", " +
                                to_string(cfg.interface.kind) + ", seed " + std::to_string(cfg.train.seed) + ")",
                            step);
    }
    if (step == 1 || (cfg.train.log_every && step % cfg.train.log_every == 0) || step == cfg.train.steps) {
      res.loss_curve.push_back({step, value});
    }
    for (auto& p : params) p.zero_grad();
    backward(loss);
    adam_step(params, opt);
    if (cfg.train.eval_every && step % cfg.train.eval_every == 0 && step != cfg.train.steps) {
      res.dev_curve.emplace_back(step, evaluate(iface, head, fs, data, cfg.task.kind, Split::dev, cfg.train.seed).value);
    }
  }

  for (auto split : {Split::train, Split::dev, Split::test}) {
    res.reports.push_back(evaluate(iface, head, fs, data, cfg.task.kind, split, cfg.train.seed,
                                   split == Split::test ? &res.transcripts : nullptr));
  }
  res.dev_curve.emplace_back(cfg.train.steps, res.report(Split::dev).value);

  for (std::size_t i = 0; i < encoders.size(); ++i) {
    if (encoders[i].weight_bytes() != frozen_bytes[i]) {
      throw std::logic_error("frozen upstream violated: encoder " + encoders[i].spec().model_id + " changed");
    }
    res.encoder_hash_after.push_back(hash_bytes(encoders[i].weight_bytes()));
  }
  res.checkpoint = make_checkpoint(iface, cfg.dim_rule, &head);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::filesystem::path persist(const RunResult& result, const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto dir = out_dir / result.digest;
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "report.csv");
    write_reports_csv(os, result.reports);
  }
  {
    std::ofstream os(dir / "losscurve.csv");
    os << "step,loss\n";
    for (const auto& p : result.loss_curve) os << p.step << ',' << detail::format_double(p.loss) << '\n';
  }
  write_checkpoint(result.checkpoint, dir / "checkpoint.ifc");
  if (!result.transcripts.empty()) {
    std::ofstream os(dir / "transcripts.txt");
    for (const auto& [item, symbols] : result.transcripts) os << format_transcript(std::to_string(item), symbols) << '\n';
  }
  {
    std::ofstream os(dir / "config.txt");
    os << emit_config(cfg);
  }
  return dir;
}

}  // namespace fusionkit
