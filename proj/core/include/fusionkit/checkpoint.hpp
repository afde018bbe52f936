#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusionkit/heads.hpp"
#include "fusionkit/interfaces.hpp"
#include "fusionkit/matcher.hpp"

namespace fusionkit {

// "IFC1" | u32 version=1 | u32 config_len | config (key=value lines) |
// u32 n_entries | per entry: u32 name_len, name, u32 rank, rank × u32 dims,
// float32 payload. Little-endian; payload precision is float32.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<NamedParam> params;

  const std::string* find(const std::string& key) const;
  const std::string& at(const std::string& key) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError (bad_magic, unsupported_version, truncated,
/// dimension_overflow, invalid_header).
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Interface parameters plus the shape keys needed to rebuild it; head
/// parameters are appended when a head is given.
Checkpoint make_checkpoint(const Interface& iface, DimRule dim_rule, const Head* head = nullptr);

/// Rebuilds the interface from the config keys and loads its parameters.
Interface interface_from_checkpoint(const Checkpoint& ckpt);
DimRule dim_rule_from_checkpoint(const Checkpoint& ckpt);
std::optional<Head> head_from_checkpoint(const Checkpoint& ckpt);

}  // namespace fusionkit
