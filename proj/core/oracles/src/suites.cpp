#include "fusionkit/oracles/suites.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>

#include "fusionkit/bundle.hpp"
#include "fusionkit/checkpoint.hpp"
#include "fusionkit/config.hpp"
#include "fusionkit/grad_check.hpp"
#include "fusionkit/heads.hpp"
#include "fusionkit/interfaces.hpp"
#include "fusionkit/matcher.hpp"
#include "fusionkit/metrics.hpp"
#include "fusionkit/ops.hpp"
#include "fusionkit/oracles/oracles.hpp"
#include "fusionkit/random.hpp"

namespace fusionkit::oracles {

void SuiteResult::fail(std::string what) {
  passed = false;
  if (failures.size() < 20) failures.push_back(std::move(what));
}

void SuiteResult::observe(double error, const std::string& label) {
  ++cases;
  if (!(error <= worst) || worst_case.empty()) {
    if (!(error <= worst)) worst = error;
    if (worst_case.empty() || worst == error) worst_case = label;
  }
  if (!(error <= tolerance)) fail(label + ": error " + std::to_string(error));
}

namespace {

class Timer {
 public:
  explicit Timer(SuiteResult& r) : r_(r), t0_(std::chrono::steady_clock::now()) {}
  ~Timer() { r_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  SuiteResult& r_;
  std::chrono::steady_clock::time_point t0_;
};

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0, bool grad = false) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), grad);
}

}  // namespace

SuiteResult run_grad_suite(const GradSuiteOptions& o) {
  SuiteResult res;
  res.name = "grad";
  res.tolerance = o.tolerance;
  Timer timer(res);
  double worst_plain = 0.0, worst_abs = 0.0;
  std::size_t coords = 0;
  const InterfaceKind kinds[] = {InterfaceKind::ws, InterfaceKind::gumd, InterfaceKind::hconv, InterfaceKind::chconv};
  const HeadKind heads[] = {HeadKind::ctc, HeadKind::classify, HeadKind::verify};
  for (auto kind : kinds)
    for (auto hk : heads)
      for (auto n : o.n_models)
        for (std::size_t s = 0; s < o.seeds; ++s) {
          const std::uint64_t seed = splitmix64((static_cast<std::uint64_t>(kind) << 40) ^
                                                (static_cast<std::uint64_t>(hk) << 32) ^ (n << 16) ^ s);
          Rng rng(seed);
          std::vector<Tensor> stacks;
          for (std::size_t m = 0; m < n; ++m) stacks.push_back(random_tensor(rng, {o.layers, o.frames, o.dim}));

          InterfaceConfig ic;
          ic.kind = kind;
          ic.output_dim = o.dim;
          ic.rng_seed = seed;
          Interface iface = Interface::build(ic, n, o.layers, std::vector<std::size_t>(n, o.dim));
          for (auto& p : iface.parameters()) {
            // Logits and biases start symmetric; weights keep their fan-in
            // scale so GELU stays out of its flat tail.
            if (p.name.find("weight") != std::string::npos) continue;
            auto d = p.value.mutable_data();
            for (auto& v : d) v += 0.3 * rng.normal();
          }
          const auto noise = kind == InterfaceKind::gumd ? iface.sample_noise() : std::vector<Tensor>{};

          HeadConfig hc;
          hc.kind = hk;
          hc.input_dim = o.dim;
          hc.classes = 3;
          hc.embed_dim = 4;
          hc.rng_seed = seed;
          Head head = Head::build(hc);
          for (auto& p : head.parameters()) {
            auto d = p.value.mutable_data();
            for (auto& v : d) v += 0.1 * rng.normal();
          }
          BatchTargets targets;
          std::vector<int> seq(1 + rng.below(3));
          for (auto& v : seq) v = 1 + static_cast<int>(rng.below(3));
          targets.sequences.push_back(seq);
          targets.labels.push_back(static_cast<int>(rng.below(3)));

          auto forward = [&]() {
            Tensor feat = kind == InterfaceKind::gumd ? iface.forward_gumd(stacks, noise, false)
                                                      : iface.forward(stacks, Mode::eval);
            return head.loss(feat, 1, targets);
          };
          std::vector<Tensor> params;
          for (auto& p : iface.parameters()) params.push_back(p.value);
          for (auto& p : head.parameters()) params.push_back(p.value);
          GradCheckOptions gco;
          gco.eps = o.eps;
          gco.stencil = o.stencil;
          gco.tensor_floor = o.tensor_floor;
          gco.max_coords_per_tensor = o.max_coords_per_tensor;
          gco.coordinate_seed = seed;
          const std::string label = std::string(to_string(kind)) + "+" + to_string(hk) + " N=" + std::to_string(n) +
                                    " seed=" + std::to_string(seed);
          try {
            const auto rep = grad_check_report(forward, params, gco);
            worst_plain = std::max(worst_plain, rep.worst_plain);
            worst_abs = std::max(worst_abs, rep.worst_abs);
            coords += rep.coords;
            res.observe(rep.worst, label);
          } catch (const std::exception& e) {
            res.fail(label + ": " + e.what());
          }
        }
  char note[160];
  std::snprintf(note, sizeof note, "%zu coordinates; worst absolute error %.3e; worst relative error with a 1e-8 floor only %.3e",
                coords, worst_abs, worst_plain);
  res.notes.push_back(note);
  return res;
}

SuiteResult run_ctc_suite(std::size_t draws, std::uint64_t seed) {
  SuiteResult res;
  res.name = "ctc";
  res.tolerance = 1e-10;
  Timer timer(res);
  Rng rng(seed);
  for (std::size_t V = 1; V <= 3; ++V)
    for (std::size_t T = 1; T <= 6; ++T)
      for (std::size_t len = 1; len <= 3; ++len) {
        std::size_t combos = 1;
        for (std::size_t i = 0; i < len; ++i) combos *= V;
        for (std::size_t c = 0; c < combos; ++c) {
          std::vector<int> labels(len);
          std::size_t code = c;
          for (auto& l : labels) {
            l = 1 + static_cast<int>(code % V);
            code /= V;
          }
          if (T < ctc_min_frames(labels)) continue;
          for (std::size_t d = 0; d < draws; ++d) {
            const Tensor lp = log_softmax(random_tensor(rng, {T, V + 1}, 2.0), 1);
            const double dp = ctc_loss(lp, labels).item();
            const double brute = ctc_bruteforce(lp.data(), T, V + 1, labels);
            char label[96];
            std::snprintf(label, sizeof label, "T=%zu V=%zu labels=%zu-long #%zu draw %zu", T, V, len, c, d);
            res.observe(std::abs(dp - brute), label);
          }
        }
      }
  return res;
}

SuiteResult run_interp_suite(std::size_t cases, std::uint64_t seed) {
  SuiteResult res;
  res.name = "interp";
  res.tolerance = 1e-12;
  Timer timer(res);
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t len = 1 + rng.below(16);
    const std::size_t new_len = len + rng.below(64 - len + 1);
    const std::size_t outer = 1 + rng.below(3), inner = 1 + rng.below(3);
    const Tensor x = random_tensor(rng, {outer, len, inner});
    const Tensor y = resample_linear(x, 1, new_len);
    const std::string label = "case " + std::to_string(c) + " len " + std::to_string(len) + "->" + std::to_string(new_len);
    if (new_len == len) {
      const bool same = y.shape() == x.shape() &&
                        std::memcmp(y.data().data(), x.data().data(), x.size() * sizeof(double)) == 0;
      if (!same) res.fail(label + ": identity is not bit-exact");
      res.observe(0.0, label);
      continue;
    }
    double err = 0.0;
    std::vector<double> line(len);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        for (std::size_t k = 0; k < len; ++k) line[k] = x.data()[(o * len + k) * inner + i];
        const auto ref = resample_scalar(line, new_len);
        for (std::size_t j = 0; j < new_len; ++j)
          err = std::max(err, std::abs(y.data()[(o * new_len + j) * inner + i] - ref[j]));
      }
    res.observe(err, label);
  }
  return res;
}

SuiteResult run_eer_suite(std::size_t cases, std::uint64_t seed) {
  SuiteResult res;
  res.name = "eer";
  res.tolerance = 1e-9;
  Timer timer(res);
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t np = 1 + rng.below(50), nn = 1 + rng.below(50);
    const bool grid = rng.below(2) == 0;  // coarse grid scores produce ties
    const double shift = rng.uniform(0.0, 0.5);
    auto draw = [&](double offset) {
      const double u = rng.uniform_open() * 0.75 + offset;
      return grid ? std::floor(u * 64.0) / 64.0 : u;
    };
    std::vector<double> pos(np), neg(nn);
    for (auto& s : pos) s = draw(shift);
    for (auto& s : neg) s = draw(0.0);
    const std::string label = "case " + std::to_string(c);
    res.observe(std::abs(eer(pos, neg) - eer_sweep(pos, neg)), label);

    // 2x+1 is exact on a 1/4096 grid, so the transform is strictly monotone
    // in floating point too.
    for (auto& s : pos) s = std::floor(s * 4096.0) / 4096.0;
    for (auto& s : neg) s = std::floor(s * 4096.0) / 4096.0;
    std::vector<double> pos2(pos), neg2(neg);
    for (auto& s : pos2) s = 2.0 * s + 1.0;
    for (auto& s : neg2) s = 2.0 * s + 1.0;
    if (eer(pos, neg) != eer(pos2, neg2)) res.fail(label + ": eer changed under x -> 2x+1");
  }
  return res;
}

SuiteResult run_edit_suite(std::size_t pairs, std::uint64_t seed) {
  SuiteResult res;
  res.name = "edit";
  res.tolerance = 0.0;
  Timer timer(res);
  Rng rng(seed);
  auto random_string = [&] {
    std::vector<int> s(rng.below(9));
    for (auto& v : s) v = static_cast<int>(rng.below(3));
    return s;
  };
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto a = random_string(), b = random_string(), c = random_string();
    const std::size_t ab = edit_distance(a, b);
    const std::string label = "pair " + std::to_string(i);
    res.observe(std::abs(static_cast<double>(ab) - static_cast<double>(edit_distance_table(a, b))), label);
    if (ab != edit_distance(b, a)) res.fail(label + ": not symmetric");
    if (edit_distance(a, a) != 0) res.fail(label + ": d(a,a) != 0");
    if ((ab == 0) != (a == b)) res.fail(label + ": identity of indiscernibles");
    if (edit_distance(a, c) > ab + edit_distance(b, c)) res.fail(label + ": triangle inequality");
  }
  return res;
}

namespace {

template <class Fn>
void expect_format_error(SuiteResult& res, const std::string& label, FormatErrorKind kind, Fn&& fn,
                         const std::function<void(const FormatError&)>& extra = {}) {
  ++res.cases;
  try {
    fn();
    res.fail(label + ": no error raised");
  } catch (const FormatError& e) {
    if (e.kind() != kind) {
      res.fail(label + ": expected " + to_string(kind) + ", got " + to_string(e.kind()));
    } else if (extra) {
      extra(e);
    }
  }
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t offset, std::uint32_t v) { std::memcpy(&b[offset], &v, 4); }

const char* kSampleConfig = R"(# sample
[encoder.0]
model_id = A
seed = 11
layers = 12
dim = 16
specialization = group_a

[encoder.1]
model_id = B
seed = 12
framerate_hz = 25
taps = 2,5
tap_width = 2

[interface]
kind = hconv
gumbel_tau = 0.5

[task]
kind = classify
n_items = 400
noise = 0.25
data_seed = 9

[train]
steps = 20
lr = 0.003

[grid]
interfaces = ws, hconv
combos = A; B; A+B
seeds = 1,2
)";

}  // namespace

SuiteResult run_format_suite(const std::optional<std::filesystem::path>& fixture, std::uint64_t seed) {
  SuiteResult res;
  res.name = "format";
  res.tolerance = 0.0;
  Timer timer(res);
  Rng rng(seed);

  for (std::size_t c = 0; c < 50; ++c) {
    const std::size_t L = 1 + rng.below(32), T = 1 + rng.below(64), D = 1 + rng.below(64);
    HiddenStateBundle b("model-" + std::to_string(c), 1 + static_cast<std::uint32_t>(rng.below(100)),
                        round_to_float32(random_tensor(rng, {L, T, D})));
    const auto bytes = encode_bundle(b);
    const auto back = decode_bundle(bytes);
    const bool same = back.model_id == b.model_id && back.framerate_hz == b.framerate_hz &&
                      back.data.shape() == b.data.shape() &&
                      std::memcmp(back.data.data().data(), b.data.data().data(), b.data.size() * sizeof(double)) == 0 &&
                      encode_bundle(back) == bytes;
    res.observe(same ? 0.0 : 1.0, "bundle round trip " + std::to_string(c));
  }

  HiddenStateBundle sample("fixture", 50, round_to_float32(random_tensor(rng, {3, 4, 5})));
  const auto good = encode_bundle(sample);
  {
    const auto path = std::filesystem::temp_directory_path() /
                      ("fusionkit-format-" + std::to_string(splitmix64(seed ^ reinterpret_cast<std::uintptr_t>(&res))) + ".hsb");
    write_bundle(sample, path);
    const auto back = read_bundle(path);
    std::filesystem::remove(path);
    res.observe(encode_bundle(back) == good ? 0.0 : 1.0, "bundle file round trip");
  }
  auto bad = good;
  std::memcpy(bad.data(), "XXXX", 4);
  expect_format_error(res, "bundle bad magic", FormatErrorKind::bad_magic, [&] { decode_bundle(bad); });
  const std::size_t cut = good.size() - 7;
  expect_format_error(
      res, "bundle truncated payload", FormatErrorKind::truncated,
      [&] { decode_bundle(std::span(good).first(cut)); },
      [&](const FormatError& e) {
        if (e.expected_bytes() != good.size() || e.actual_bytes() != cut) {
          res.fail("bundle truncated payload: byte counts " + std::to_string(e.expected_bytes()) + "/" +
                   std::to_string(e.actual_bytes()));
        }
      });
  bad = good;
  put_u32(bad, 4, 2);
  expect_format_error(res, "bundle version", FormatErrorKind::unsupported_version, [&] { decode_bundle(bad); });
  bad = good;
  put_u32(bad, 8, 0xFFFFFFFFu);
  put_u32(bad, 12, 0xFFFFFFFFu);
  expect_format_error(res, "bundle dimension overflow", FormatErrorKind::dimension_overflow, [&] { decode_bundle(bad); });
  bad = good;
  put_u32(bad, 16, 0);
  expect_format_error(res, "bundle zero dim", FormatErrorKind::invalid_header, [&] { decode_bundle(bad); });

  for (auto kind : {InterfaceKind::ws, InterfaceKind::gumd, InterfaceKind::hconv, InterfaceKind::chconv}) {
    InterfaceConfig ic;
    ic.kind = kind;
    ic.output_dim = 6;
    ic.rng_seed = rng.next_u64();
    Interface iface = Interface::build(ic, 2, 7, {6, 6});
    for (auto& p : iface.parameters()) {
      auto d = p.value.mutable_data();
      for (auto& v : d) v = rng.normal();
    }
    HeadConfig hc;
    hc.kind = HeadKind::verify;
    hc.input_dim = 6;
    hc.classes = 4;
    Head head = Head::build(hc);
    const auto bytes = encode_checkpoint(make_checkpoint(iface, DimRule::interpolate_to_max, &head));
    const auto back = decode_checkpoint(bytes);
    const Interface restored = interface_from_checkpoint(back);
    bool same = encode_checkpoint(back) == bytes && dim_rule_from_checkpoint(back) == DimRule::interpolate_to_max &&
                head_from_checkpoint(back).has_value();
    for (std::size_t i = 0; i < iface.parameters().size() && same; ++i) {
      const auto a = iface.parameters()[i].value.data();
      const auto b = restored.parameters()[i].value.data();
      for (std::size_t k = 0; k < a.size(); ++k) same = same && static_cast<double>(static_cast<float>(a[k])) == b[k];
    }
    res.observe(same ? 0.0 : 1.0, std::string("checkpoint round trip ") + to_string(kind));
    auto broken = bytes;
    std::memcpy(broken.data(), "HSB1", 4);
    expect_format_error(res, "checkpoint bad magic", FormatErrorKind::bad_magic, [&] { decode_checkpoint(broken); });
    expect_format_error(res, "checkpoint truncated", FormatErrorKind::truncated,
                        [&] { decode_checkpoint(std::span(bytes).first(bytes.size() - 3)); });
  }

  {
    const ConfigFile parsed = parse_config(kSampleConfig);
    const ConfigFile again = parse_config(emit_config(parsed));
    res.observe(again == parsed && emit_config(again) == emit_config(parsed) ? 0.0 : 1.0, "config echo round trip");
  }

  if (fixture) {
    ++res.cases;
    try {
      read_bundle(*fixture);
    } catch (const FormatError& e) {
      res.fail("fixture " + fixture->string() + ": " + to_string(e.kind()) + ": " + e.what());
    }
  }
  if (res.worst_case.empty()) res.worst_case = "all cases exact";
  return res;
}

}  // namespace fusionkit::oracles
