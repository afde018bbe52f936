#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fusionkit/trainer.hpp"

namespace fusionkit {

/// Config problems; `line()` is 1-based, 0 when not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct GridSpec {
  std::vector<InterfaceKind> interfaces;
  std::vector<std::vector<std::string>> combos;  // model ids per combination
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;

  bool operator==(const GridSpec&) const = default;
};

struct ConfigFile {
  ExperimentConfig experiment;
  std::optional<GridSpec> grid;

  bool operator==(const ConfigFile&) const = default;
};

/// Sections [encoder.N], [interface], [task], [train] and optionally
/// [grid]; "key = value" lines, '#' comments. Unknown sections or keys,
/// duplicate keys and malformed values are errors.
ConfigFile parse_config(std::string_view text);
ConfigFile load_config(const std::filesystem::path& path);

/// Canonical form: every key of every section in a fixed order.
std::string emit_config(const ConfigFile& cfg);
std::string emit_config(const ExperimentConfig& cfg);

/// 16 hex digits identifying the canonical form.
std::string config_digest(const ExperimentConfig& cfg);

/// One experiment per (combo, interface, seed), in that nesting order.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base, const GridSpec& grid);

}  // namespace fusionkit
