#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fusionkit/tensor.hpp"

namespace fusionkit {

/// One upstream model's stacked hidden states (L×T×D) plus metadata. The
/// data tensor never requires a gradient.
struct HiddenStateBundle {
  std::string model_id;
  std::uint32_t framerate_hz = 50;
  Tensor data;

  HiddenStateBundle() = default;
  HiddenStateBundle(std::string id, std::uint32_t framerate, Tensor states);

  std::size_t layers() const { return data.dim(0); }
  std::size_t frames() const { return data.dim(1); }
  std::size_t dim() const { return data.dim(2); }
};

enum class FormatErrorKind { io, bad_magic, unsupported_version, truncated, dimension_overflow, invalid_header };

const char* to_string(FormatErrorKind kind);

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what, std::size_t expected = 0, std::size_t actual = 0)
      : std::runtime_error(what), kind_(kind), expected_(expected), actual_(actual) {}

  FormatErrorKind kind() const { return kind_; }
  /// Byte counts for `truncated` errors.
  std::size_t expected_bytes() const { return expected_; }
  std::size_t actual_bytes() const { return actual_; }

 private:
  FormatErrorKind kind_;
  std::size_t expected_, actual_;
};

// "HSB1" | u32 version=1 | u32 L | u32 T | u32 D | u32 framerate_hz |
// u32 model_id_len | model_id | L*T*D float32, row-major (L outer, D inner).
// Everything little-endian. Payload precision is float32.
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::size_t kMaxBundleElements = std::size_t{1} << 31;

std::vector<std::uint8_t> encode_bundle(const HiddenStateBundle& bundle);
HiddenStateBundle decode_bundle(std::span<const std::uint8_t> bytes);

void write_bundle(const HiddenStateBundle& bundle, const std::filesystem::path& path);
HiddenStateBundle read_bundle(const std::filesystem::path& path);

/// Rounds every value to the nearest float32, i.e. the value it would have
/// after a write/read cycle.
Tensor round_to_float32(const Tensor& x);

}  // namespace fusionkit
