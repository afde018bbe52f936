#include "fusionkit/synth.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "fusionkit/random.hpp"

namespace fusionkit {

namespace {

enum Stream : std::uint64_t { kScramble = 1, kInput, kMix, kTaps, kItems };

std::vector<double> gaussian(Rng& rng, std::size_t n, double stddev) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() * stddev;
  return v;
}

// Gram-Schmidt on a Gaussian matrix; rows are orthonormal.
std::vector<double> random_orthogonal(std::size_t n, Rng& rng) {
  std::vector<double> q;
  while (true) {
    q = gaussian(rng, n * n, 1.0);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      double* row = &q[i * n];
      for (std::size_t j = 0; j < i; ++j) {
        const double* prev = &q[j * n];
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) dot += row[k] * prev[k];
        for (std::size_t k = 0; k < n; ++k) row[k] -= dot * prev[k];
      }
      double norm = 0.0;
      for (std::size_t k = 0; k < n; ++k) norm += row[k] * row[k];
      norm = std::sqrt(norm);
      if (norm < 1e-8) ok = false;
      else
        for (std::size_t k = 0; k < n; ++k) row[k] /= norm;
    }
    if (ok) return q;
  }
}

void append(std::vector<std::uint8_t>& out, const std::vector<double>& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  out.insert(out.end(), p, p + v.size() * sizeof(double));
}

}  // namespace

const char* to_string(Specialization s) {
  switch (s) {
    case Specialization::generic: return "generic";
    case Specialization::group_a: return "group_a";
    case Specialization::group_b: return "group_b";
  }
  return "generic";
}

Specialization parse_specialization(const std::string& s) {
  if (s == "generic") return Specialization::generic;
  if (s == "group_a") return Specialization::group_a;
  if (s == "group_b") return Specialization::group_b;
  throw std::invalid_argument("unknown specialization '" + s + "'");
}

std::vector<std::pair<std::size_t, std::size_t>> frame_windows(std::size_t input_len, std::uint32_t input_rate_hz,
                                                               std::uint32_t framerate_hz) {
  if (input_rate_hz == 0 || framerate_hz == 0) throw std::invalid_argument("rates must be positive");
  const std::size_t frames = input_len * framerate_hz / input_rate_hz;
  std::vector<std::pair<std::size_t, std::size_t>> w(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    w[t] = {t * input_rate_hz / framerate_hz, (t + 1) * input_rate_hz / framerate_hz};
  }
  return w;
}

SynthEncoder::SynthEncoder(EncoderSpec spec) : spec_(std::move(spec)) {
  const std::size_t F = spec_.input_features, D = spec_.dim;
  if (F == 0 || D == 0) throw std::invalid_argument("encoder needs positive input_features and dim");
  if (spec_.framerate_hz == 0 || spec_.input_rate_hz == 0) throw std::invalid_argument("encoder rates must be positive");
  const std::size_t routed = spec_.taps.size() * spec_.tap_width;
  if (!spec_.taps.empty() && spec_.tap_width == 0) throw std::invalid_argument("taps need a positive tap_width");
  if (routed >= F) throw std::invalid_argument("tapped features leave no trunk input");
  for (auto t : spec_.taps) {
    if (t > spec_.layers) throw std::invalid_argument("tap layer " + std::to_string(t) + " beyond encoder depth");
  }
  if (spec_.specialization != Specialization::generic && F % 2 != 0) {
    throw std::invalid_argument("group specializations need an even feature count");
  }
  trunk_features_ = F - routed;

  Rng root(spec_.seed);
  if (spec_.specialization != Specialization::generic) {
    const std::size_t k = F / 2;
    Rng rng = root.split(kScramble);
    auto q = random_orthogonal(k, rng);
    // (I - 11ᵀ/k) · Q : centre, then rotate.
    scramble_.assign(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        double colmean = 0.0;
        for (std::size_t r = 0; r < k; ++r) colmean += q[r * k + j];
        colmean /= static_cast<double>(k);
        scramble_[i * k + j] = q[i * k + j] - colmean;
      }
  }
  {
    Rng rng = root.split(kInput);
    in_proj_ = gaussian(rng, trunk_features_ * D, 1.0 / std::sqrt(static_cast<double>(trunk_features_)));
    in_bias_ = gaussian(rng, D, 0.1);
  }
  {
    Rng rng = root.split(kMix);
    for (std::size_t l = 0; l < spec_.layers; ++l) {
      auto q = random_orthogonal(D, rng);
      for (auto& v : q) v *= 1.1;
      mix_.push_back(std::move(q));
      mix_bias_.push_back(gaussian(rng, D, 0.1));
    }
  }
  {
    Rng rng = root.split(kTaps);
    for (std::size_t j = 0; j < spec_.taps.size(); ++j) {
      tap_proj_.push_back(gaussian(rng, spec_.tap_width * D, 1.0 / std::sqrt(static_cast<double>(spec_.tap_width))));
    }
  }
}

std::size_t SynthEncoder::frames_for(std::size_t input_len) const {
  return input_len * spec_.framerate_hz / spec_.input_rate_hz;
}

HiddenStateBundle SynthEncoder::encode(const Tensor& x) const {
  const std::size_t F = spec_.input_features, D = spec_.dim, L = states();
  if (x.rank() != 2 || x.dim(1) != F) {
    throw ShapeError("encode: input must be T'x" + std::to_string(F) + ", got " + shape_str(x.shape()));
  }
  const std::size_t T = frames_for(x.dim(0));
  if (T == 0) {
    throw std::invalid_argument("encode: input of " + std::to_string(x.dim(0)) + " samples is shorter than one frame (" +
                                std::to_string(spec_.input_rate_hz / spec_.framerate_hz) + " samples)");
  }
  const auto windows = frame_windows(x.dim(0), spec_.input_rate_hz, spec_.framerate_hz);
  auto in = x.data();

  std::vector<double> pooled(T * F, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto [begin, end] = windows[t];
    for (std::size_t r = begin; r < end; ++r)
      for (std::size_t f = 0; f < F; ++f) pooled[t * F + f] += in[r * F + f];
    for (std::size_t f = 0; f < F; ++f) pooled[t * F + f] /= static_cast<double>(end - begin);
  }
  if (!scramble_.empty()) {
    const std::size_t k = F / 2;
    const std::size_t offset = spec_.specialization == Specialization::group_a ? k : 0;
    std::vector<double> tmp(k);
    for (std::size_t t = 0; t < T; ++t) {
      double* g = &pooled[t * F + offset];
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < k; ++i) acc += g[i] * scramble_[i * k + j];
        tmp[j] = acc;
      }
      std::copy(tmp.begin(), tmp.end(), g);
    }
  }

  const std::size_t routed = spec_.taps.size() * spec_.tap_width;
  std::vector<double> out(L * T * D, 0.0);
  std::vector<double> z(D), next(D);
  for (std::size_t t = 0; t < T; ++t) {
    const double* row = &pooled[t * F];
    for (std::size_t d = 0; d < D; ++d) {
      double acc = in_bias_[d];
      for (std::size_t f = 0; f < trunk_features_; ++f) acc += row[routed + f] * in_proj_[f * D + d];
      z[d] = acc;
    }
    for (std::size_t l = 0; l < L; ++l) {
      if (l > 0) {
        const auto& m = mix_[l - 1];
        for (std::size_t d = 0; d < D; ++d) {
          double acc = mix_bias_[l - 1][d];
          for (std::size_t e = 0; e < D; ++e) acc += z[e] * m[e * D + d];
          next[d] = std::tanh(acc);
        }
        z.swap(next);
      }
      double* h = &out[(l * T + t) * D];
      std::copy(z.begin(), z.end(), h);
      for (std::size_t j = 0; j < spec_.taps.size(); ++j) {
        if (spec_.taps[j] != l) continue;
        const double* block = row + j * spec_.tap_width;
        for (std::size_t d = 0; d < D; ++d) {
          double acc = 0.0;
          for (std::size_t c = 0; c < spec_.tap_width; ++c) acc += block[c] * tap_proj_[j][c * D + d];
          h[d] += acc;
        }
      }
    }
  }
  for (auto& v : out) v = static_cast<double>(static_cast<float>(v));
  return HiddenStateBundle(spec_.model_id, spec_.framerate_hz, Tensor::from({L, T, D}, std::move(out)));
}

std::vector<std::uint8_t> SynthEncoder::weight_bytes() const {
  std::vector<std::uint8_t> out;
  append(out, scramble_);
  append(out, in_proj_);
  append(out, in_bias_);
  for (const auto& m : mix_) append(out, m);
  for (const auto& b : mix_bias_) append(out, b);
  for (const auto& p : tap_proj_) append(out, p);
  return out;
}

const char* to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::ctc_strings: return "ctc_strings";
    case DatasetKind::classify_xor: return "classify_xor";
    case DatasetKind::verify_pairs: return "verify_pairs";
  }
  return "unknown";
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "unknown";
}

Split split_of(std::size_t index, std::uint64_t seed) {
  const auto bucket = splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(index)) % 10;
  if (bucket < 8) return Split::train;
  return bucket == 8 ? Split::dev : Split::test;
}

std::vector<std::size_t> SynthDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (split_of(i, seed) == split) out.push_back(i);
  return out;
}

SynthDataset make_xor_dataset(std::uint64_t seed, std::size_t n_items, std::size_t input_len, std::size_t features,
                              const XorTaskOptions& opt) {
  if (features == 0 || features % 2 != 0) {
    throw std::invalid_argument("xor task needs an even feature count, got " + std::to_string(features));
  }
  const std::size_t k = features / 2;
  SynthDataset ds;
  ds.kind = DatasetKind::classify_xor;
  ds.seed = seed;
  ds.input_len = input_len;
  ds.features = features;
  ds.input_rate_hz = opt.input_rate_hz;
  ds.n_classes = 2;
  Rng root = Rng(seed).split(kItems);
  for (std::size_t i = 0; i < n_items; ++i) {
    Rng rng = root.split(i);
    int bits[2];
    std::vector<double> base(features);
    for (int g = 0; g < 2; ++g) {
      bits[g] = rng.uniform_open() < opt.bit_prior ? 1 : 0;
      std::vector<double> pattern = gaussian(rng, k, opt.distractor);
      double m = 0.0;
      for (double v : pattern) m += v;
      m /= static_cast<double>(k);
      for (std::size_t j = 0; j < k; ++j) base[g * k + j] = (bits[g] ? 1.0 : -1.0) + pattern[j] - m;
    }
    std::vector<double> x(input_len * features);
    for (std::size_t r = 0; r < input_len; ++r)
      for (std::size_t f = 0; f < features; ++f) x[r * features + f] = base[f] + opt.noise * rng.normal();
    SynthItem item;
    item.input = Tensor::from({input_len, features}, std::move(x));
    item.label = bits[0] ^ bits[1];
    ds.items.push_back(std::move(item));
  }
  return ds;
}

ComplementaryTask make_complementary_task(std::uint64_t seed, std::size_t n_items, std::size_t input_len,
                                          std::size_t features, const ComplementaryOptions& opt) {
  auto data = make_xor_dataset(seed, n_items, input_len, features, opt.task);
  EncoderSpec spec;
  spec.layers = opt.layers;
  spec.dim = opt.dim;
  spec.framerate_hz = opt.framerate_hz;
  spec.input_rate_hz = opt.task.input_rate_hz;
  spec.input_features = features;
  EncoderSpec a = spec, b = spec;
  a.model_id = "A";
  a.seed = splitmix64(seed ^ 0xa);
  a.specialization = Specialization::group_a;
  b.model_id = "B";
  b.seed = splitmix64(seed ^ 0xb);
  b.specialization = Specialization::group_b;
  return {std::move(data), SynthEncoder(a), SynthEncoder(b)};
}

SynthDataset make_ctc_task(std::uint64_t seed, std::size_t n_items, std::size_t vocab_size, std::size_t input_len,
                           std::size_t features, const CtcTaskOptions& opt) {
  if (vocab_size < 2) throw std::invalid_argument("ctc task needs vocab_size >= 2");
  if (vocab_size * opt.symbol_width > features) {
    throw std::invalid_argument("ctc task needs at least vocab_size * symbol_width features");
  }
  const auto windows = frame_windows(input_len, opt.input_rate_hz, opt.framerate_hz);
  const std::size_t T = windows.size();
  const std::size_t period = opt.segment_frames + opt.gap_frames;
  if (opt.segment_frames == 0 || T < period) throw std::invalid_argument("ctc task: input too short for one symbol");
  const std::size_t max_symbols = T / period;

  SynthDataset ds;
  ds.kind = DatasetKind::ctc_strings;
  ds.seed = seed;
  ds.input_len = input_len;
  ds.features = features;
  ds.input_rate_hz = opt.input_rate_hz;
  ds.n_classes = vocab_size;
  const std::size_t symbol_cols = vocab_size * opt.symbol_width;
  Rng root = Rng(seed).split(kItems);
  for (std::size_t i = 0; i < n_items; ++i) {
    Rng rng = root.split(i);
    const std::size_t n_sym = 1 + rng.below(max_symbols);
    const std::size_t start = rng.below(T - n_sym * period + 1);
    std::vector<int> frame_symbol(T, 0);
    SynthItem item;
    for (std::size_t s = 0; s < n_sym; ++s) {
      const int sym = 1 + static_cast<int>(rng.below(vocab_size));
      item.symbols.push_back(sym);
      for (std::size_t f = 0; f < opt.segment_frames; ++f) frame_symbol[start + s * period + f] = sym;
    }
    std::vector<double> frame_distractor(T * (features - symbol_cols));
    for (auto& v : frame_distractor) v = opt.distractor * rng.normal();
    std::vector<double> x(input_len * features, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t r = windows[t].first; r < windows[t].second; ++r) {
        double* row = &x[r * features];
        if (frame_symbol[t] > 0) {
          const std::size_t block = static_cast<std::size_t>(frame_symbol[t] - 1) * opt.symbol_width;
          for (std::size_t c = 0; c < opt.symbol_width; ++c) row[block + c] = 1.0;
        }
        for (std::size_t f = symbol_cols; f < features; ++f)
          row[f] = frame_distractor[t * (features - symbol_cols) + (f - symbol_cols)];
      }
    }
    if (opt.noise > 0.0)
      for (auto& v : x) v += opt.noise * rng.normal();
    item.input = Tensor::from({input_len, features}, std::move(x));
    ds.items.push_back(std::move(item));
  }
  return ds;
}

SynthDataset make_verify_task(std::uint64_t seed, std::size_t n_items, std::size_t input_len, std::size_t features,
                              const VerifyTaskOptions& opt) {
  if (opt.speakers < 2) throw std::invalid_argument("verify task needs at least two speakers");
  SynthDataset ds;
  ds.kind = DatasetKind::verify_pairs;
  ds.seed = seed;
  ds.input_len = input_len;
  ds.features = features;
  ds.input_rate_hz = opt.input_rate_hz;
  ds.n_classes = opt.speakers;
  Rng spk_rng = Rng(seed).split(kScramble);
  std::vector<std::vector<double>> voices;
  for (std::size_t s = 0; s < opt.speakers; ++s) voices.push_back(gaussian(spk_rng, features, 1.0));
  Rng root = Rng(seed).split(kItems);
  for (std::size_t i = 0; i < n_items; ++i) {
    Rng rng = root.split(i);
    const std::size_t spk = rng.below(opt.speakers);
    auto channel = gaussian(rng, features, opt.channel);
    std::vector<double> x(input_len * features);
    for (std::size_t r = 0; r < input_len; ++r)
      for (std::size_t f = 0; f < features; ++f)
        x[r * features + f] = voices[spk][f] + channel[f] + opt.noise * rng.normal();
    SynthItem item;
    item.input = Tensor::from({input_len, features}, std::move(x));
    item.label = static_cast<int>(spk);
    ds.items.push_back(std::move(item));
  }
  return ds;
}

}  // namespace fusionkit
