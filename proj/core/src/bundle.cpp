#include "fusionkit/bundle.hpp"

#include <fstream>
#include <iterator>

#include "binary_io.hpp"

namespace fusionkit {

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorKind::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrorKind::io, "write failed for " + path.string());
}

}  // namespace detail

HiddenStateBundle::HiddenStateBundle(std::string id, std::uint32_t framerate, Tensor states)
    : model_id(std::move(id)), framerate_hz(framerate), data(std::move(states)) {
  if (data.rank() != 3) throw ShapeError("bundle data must be L×T×D, got " + shape_str(data.shape()));
  if (data.requires_grad()) data = data.detach(false);
  if (framerate_hz == 0) throw std::invalid_argument("bundle framerate must be positive");
}

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::io: return "io";
    case FormatErrorKind::bad_magic: return "bad_magic";
    case FormatErrorKind::unsupported_version: return "unsupported_version";
    case FormatErrorKind::truncated: return "truncated";
    case FormatErrorKind::dimension_overflow: return "dimension_overflow";
    case FormatErrorKind::invalid_header: return "invalid_header";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode_bundle(const HiddenStateBundle& b) {
  detail::ByteWriter w;
  w.bytes("HSB1");
  w.u32(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(b.layers()));
  w.u32(static_cast<std::uint32_t>(b.frames()));
  w.u32(static_cast<std::uint32_t>(b.dim()));
  w.u32(b.framerate_hz);
  w.u32(static_cast<std::uint32_t>(b.model_id.size()));
  w.bytes(b.model_id);
  for (double v : b.data.data()) w.f32(static_cast<float>(v));
  return w.take();
}

HiddenStateBundle decode_bundle(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "bundle");
  if (bytes.size() < 4 || r.bytes(4) != "HSB1") {
    throw FormatError(FormatErrorKind::bad_magic, "bundle: bad magic (expected HSB1)");
  }
  const std::uint32_t version = r.u32();
  if (version != kBundleVersion) {
    throw FormatError(FormatErrorKind::unsupported_version,
                      "bundle: unsupported version " + std::to_string(version));
  }
  const std::uint64_t L = r.u32(), T = r.u32(), D = r.u32();
  const std::uint32_t framerate = r.u32();
  const std::uint32_t id_len = r.u32();
  if (L == 0 || T == 0 || D == 0 || framerate == 0) {
    throw FormatError(FormatErrorKind::invalid_header, "bundle: zero dimension or framerate in header");
  }
  if (L > kMaxBundleElements / T || L * T > kMaxBundleElements / D) {
    throw FormatError(FormatErrorKind::dimension_overflow,
                      "bundle: " + std::to_string(L) + "x" + std::to_string(T) + "x" + std::to_string(D) +
                          " exceeds the element limit");
  }
  const std::uint64_t count = L * T * D;
  std::string id = r.bytes(id_len);
  r.need(count * sizeof(float));
  std::vector<double> data(count);
  for (auto& v : data) v = static_cast<double>(r.f32());
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorKind::invalid_header,
                      "bundle: " + std::to_string(r.remaining()) + " trailing bytes after the payload");
  }
  return HiddenStateBundle(std::move(id), framerate,
                           Tensor::from({static_cast<std::size_t>(L), static_cast<std::size_t>(T),
                                         static_cast<std::size_t>(D)},
                                        std::move(data)));
}

void write_bundle(const HiddenStateBundle& bundle, const std::filesystem::path& path) {
  detail::write_file(path, encode_bundle(bundle));
}

HiddenStateBundle read_bundle(const std::filesystem::path& path) {
  return decode_bundle(detail::read_file(path));
}

Tensor round_to_float32(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = static_cast<double>(static_cast<float>(v));
  return Tensor::from(x.shape(), std::move(out));
}

}  // namespace fusionkit
