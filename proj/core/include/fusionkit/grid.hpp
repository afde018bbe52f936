#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fusionkit/trainer.hpp"

namespace fusionkit {

/// Seed-averaged result of one (combo, interface) cell.
struct GridRow {
  std::string combo;
  std::size_t n_models = 0;
  InterfaceKind interface_kind = InterfaceKind::ws;
  std::string metric;
  double mean = 0.0;  // test split
  std::size_t n_seeds = 0;
  std::size_t param_count = 0;
};

struct FusionGain {
  std::string combo;
  InterfaceKind interface_kind = InterfaceKind::ws;
  std::string best_single;
  double single_value = 0.0;
  double fusion_value = 0.0;
  double gain_percent = 0.0;  // positive means fusion is better
};

struct GridReport {
  std::vector<RunResult> runs;  // in config order
  std::vector<GridRow> rows;    // sorted by (models, combo, interface)
  std::vector<FusionGain> gains;
  std::string markdown;
  std::string csv;
};

/// Rows from runs, averaging over seeds of the same (combo, interface).
std::vector<GridRow> aggregate(const std::vector<RunResult>& runs);

/// Relative improvement of each fusion row over its best constituent single
/// model with the same interface. Throws if a constituent row is missing.
std::vector<FusionGain> fusion_gain(const std::vector<GridRow>& rows);

std::string render_markdown(const std::vector<GridRow>& rows, const std::vector<FusionGain>& gains);
std::string render_csv(const std::vector<GridRow>& rows);

using GridProgress = std::function<void(std::size_t done, std::size_t total, const RunResult&)>;

/// Trains every config (up to `jobs` at a time) and assembles the table.
/// Fusion gains are computed when every fusion row has its constituents.
GridReport run_grid(const std::vector<ExperimentConfig>& configs, std::size_t jobs = 1,
                    const GridProgress& progress = {});

}  // namespace fusionkit
