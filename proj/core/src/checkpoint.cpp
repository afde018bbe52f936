#include "fusionkit/checkpoint.hpp"

#include <charconv>
#include <stdexcept>

#include "binary_io.hpp"
#include "text_util.hpp"

namespace fusionkit {

namespace {

FormatError header_error(const std::string& what) {
  return FormatError(FormatErrorKind::invalid_header, "checkpoint: " + what);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw header_error("key '" + key + "' has non-integer value '" + value + "'");
  }
  return v;
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw header_error("key '" + key + "' has non-numeric value '" + value + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw header_error("key '" + key + "' must be true or false, got '" + value + "'");
}

void load_params(const Checkpoint& ckpt, std::vector<NamedParam>& params) {
  for (auto& p : params) {
    const NamedParam* src = nullptr;
    for (const auto& e : ckpt.params)
      if (e.name == p.name) src = &e;
    if (!src) throw header_error("missing parameter '" + p.name + "'");
    if (src->value.shape() != p.value.shape()) {
      throw header_error("parameter '" + p.name + "' has shape " + shape_str(src->value.shape()) + ", expected " +
                         shape_str(p.value.shape()));
    }
    auto dst = p.value.mutable_data();
    auto from = src->value.data();
    std::copy(from.begin(), from.end(), dst.begin());
  }
}

}  // namespace

const std::string* Checkpoint::find(const std::string& key) const {
  for (const auto& [k, v] : config)
    if (k == key) return &v;
  return nullptr;
}

const std::string& Checkpoint::at(const std::string& key) const {
  if (const auto* v = find(key)) return *v;
  throw header_error("missing config key '" + key + "'");
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::string text;
  for (const auto& [k, v] : ckpt.config) text += k + "=" + v + "\n";
  detail::ByteWriter w;
  w.bytes("IFC1");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p.value.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (bytes.size() < 4 || r.bytes(4) != "IFC1") {
    throw FormatError(FormatErrorKind::bad_magic, "checkpoint: bad magic (expected IFC1)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorKind::unsupported_version, "checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::string text = r.bytes(r.u32());
  for (const auto& line : detail::split(text, '\n')) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw header_error("config line without '=': " + line);
    ckpt.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedParam p;
    p.name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw header_error("parameter '" + p.name + "' has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint32_t d = r.u32();
      if (d == 0) throw header_error("parameter '" + p.name + "' has a zero dimension");
      if (count > kMaxBundleElements / d) {
        throw FormatError(FormatErrorKind::dimension_overflow, "checkpoint: parameter '" + p.name + "' is too large");
      }
      count *= d;
      shape.push_back(d);
    }
    r.need(count * sizeof(float));
    std::vector<double> data(count);
    for (auto& v : data) v = r.f32();
    p.value = Tensor::from(std::move(shape), std::move(data), true);
    ckpt.params.push_back(std::move(p));
  }
  if (r.remaining() != 0) throw header_error(std::to_string(r.remaining()) + " trailing bytes");
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(detail::read_file(path)); }

Checkpoint make_checkpoint(const Interface& iface, DimRule dim_rule, const Head* head) {
  const auto& c = iface.config();
  Checkpoint ckpt;
  auto put = [&](const std::string& k, std::string v) { ckpt.config.emplace_back(k, std::move(v)); };
  put("kind", to_string(c.kind));
  put("output_dim", std::to_string(c.output_dim));
  put("hconv_kernel", std::to_string(c.hconv_kernel));
  put("hconv_stride", std::to_string(c.hconv_stride));
  put("hconv_channels", std::to_string(c.hconv_channels));
  put("gumbel_tau", detail::format_double(c.gumbel_tau));
  put("gumbel_hard_train", c.gumbel_hard_train ? "true" : "false");
  put("gumbel_hard_eval", c.gumbel_hard_eval ? "true" : "false");
  put("rng_seed", std::to_string(c.rng_seed));
  put("n_models", std::to_string(iface.n_models()));
  put("layers", std::to_string(iface.layers()));
  put("input_dims", detail::join(iface.input_dims(), ","));
  put("dim_rule", to_string(dim_rule));
  for (const auto& p : iface.parameters()) ckpt.params.push_back(p);
  if (head) {
    const auto& h = head->config();
    put("head.kind", to_string(h.kind));
    put("head.input_dim", std::to_string(h.input_dim));
    put("head.classes", std::to_string(h.classes));
    put("head.embed_dim", std::to_string(h.embed_dim));
    for (const auto& p : head->parameters()) ckpt.params.push_back(p);
  }
  return ckpt;
}

Interface interface_from_checkpoint(const Checkpoint& ckpt) {
  InterfaceConfig c;
  try {
    c.kind = parse_interface_kind(ckpt.at("kind"));
  } catch (const std::invalid_argument& e) {
    throw header_error(e.what());
  }
  c.output_dim = to_u64("output_dim", ckpt.at("output_dim"));
  c.hconv_kernel = to_u64("hconv_kernel", ckpt.at("hconv_kernel"));
  c.hconv_stride = to_u64("hconv_stride", ckpt.at("hconv_stride"));
  c.hconv_channels = to_u64("hconv_channels", ckpt.at("hconv_channels"));
  c.gumbel_tau = to_double("gumbel_tau", ckpt.at("gumbel_tau"));
  c.gumbel_hard_train = to_bool("gumbel_hard_train", ckpt.at("gumbel_hard_train"));
  c.gumbel_hard_eval = to_bool("gumbel_hard_eval", ckpt.at("gumbel_hard_eval"));
  c.rng_seed = to_u64("rng_seed", ckpt.at("rng_seed"));
  const std::size_t n_models = to_u64("n_models", ckpt.at("n_models"));
  const std::size_t layers = to_u64("layers", ckpt.at("layers"));
  std::vector<std::size_t> dims;
  for (const auto& d : detail::split(ckpt.at("input_dims"), ',')) dims.push_back(to_u64("input_dims", d));
  Interface iface = [&] {
    try {
      return Interface::build(c, n_models, layers, dims);
    } catch (const std::invalid_argument& e) {
      throw header_error(e.what());
    }
  }();
  load_params(ckpt, iface.parameters());
  return iface;
}

DimRule dim_rule_from_checkpoint(const Checkpoint& ckpt) {
  const auto* v = ckpt.find("dim_rule");
  if (!v) return DimRule::require_equal;
  try {
    return parse_dim_rule(*v);
  } catch (const std::invalid_argument& e) {
    throw header_error(e.what());
  }
}

std::optional<Head> head_from_checkpoint(const Checkpoint& ckpt) {
  const auto* kind = ckpt.find("head.kind");
  if (!kind) return std::nullopt;
  HeadConfig h;
  if (*kind == "ctc") h.kind = HeadKind::ctc;
  else if (*kind == "classify") h.kind = HeadKind::classify;
  else if (*kind == "verify") h.kind = HeadKind::verify;
  else throw header_error("unknown head kind '" + *kind + "'");
  h.input_dim = to_u64("head.input_dim", ckpt.at("head.input_dim"));
  h.classes = to_u64("head.classes", ckpt.at("head.classes"));
  h.embed_dim = to_u64("head.embed_dim", ckpt.at("head.embed_dim"));
  Head head = Head::build(h);
  load_params(ckpt, head.parameters());
  return head;
}

}  // namespace fusionkit
