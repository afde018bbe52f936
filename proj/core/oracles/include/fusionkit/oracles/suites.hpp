#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fusionkit/grad_check.hpp"

namespace fusionkit::oracles {

struct SuiteResult {
  std::string name;
  bool passed = true;
  double worst = 0.0;      // worst observed error
  double tolerance = 0.0;
  std::string worst_case;  // description of the case behind `worst`
  std::size_t cases = 0;
  double seconds = 0.0;
  std::vector<std::string> failures;
  std::vector<std::string> notes;  // informational lines

  void fail(std::string what);
  /// Records an error value for `label`, failing when above tolerance.
  void observe(double error, const std::string& label);
};

struct GradSuiteOptions {
  std::size_t seeds = 20;
  std::size_t layers = 13, frames = 8, dim = 8;
  std::vector<std::size_t> n_models{1, 2, 3};
  std::size_t max_coords_per_tensor = 8;
  // Fourth-order differences at a wider step keep the numeric side accurate
  // to ~1e-12 absolute; the floor stops gradients that are zero up to
  // float64 roundoff from dominating the relative error.
  double eps = 1e-3;
  Stencil stencil = Stencil::central5;
  double tensor_floor = 1e-4;
  double tolerance = 1e-5;
};

/// Every interface kind (GumD in soft mode under frozen noise) composed
/// with every head, checked against central differences.
SuiteResult run_grad_suite(const GradSuiteOptions& options = {});

/// CTC dynamic programme against exhaustive alignment enumeration for all
/// T≤6, V≤3, |labels|≤3.
SuiteResult run_ctc_suite(std::size_t draws = 100, std::uint64_t seed = 0);

/// resample_linear against the scalar-loop oracle, plus bit-exact identity.
SuiteResult run_interp_suite(std::size_t cases = 1000, std::uint64_t seed = 0);

/// EER against the threshold-sweep oracle and monotone-transform
/// invariance.
SuiteResult run_eer_suite(std::size_t cases = 1000, std::uint64_t seed = 0);

/// Edit distance against the full-table oracle and the metric axioms.
SuiteResult run_edit_suite(std::size_t pairs = 10000, std::uint64_t seed = 0);

/// Bundle/checkpoint round trips and corrupted-file error kinds. A given
/// fixture must decode as a valid bundle.
SuiteResult run_format_suite(const std::optional<std::filesystem::path>& fixture = std::nullopt,
                             std::uint64_t seed = 0);

}  // namespace fusionkit::oracles
