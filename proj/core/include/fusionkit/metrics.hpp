#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fusionkit {

std::size_t edit_distance(std::span<const int> a, std::span<const int> b);

/// Σ edit distance / Σ reference length.
double cer(const std::vector<std::vector<int>>& hyps, const std::vector<std::vector<int>>& refs);

double accuracy(std::span<const int> preds, std::span<const int> labels);

/// Rate where false accepts (neg ≥ θ) equal false rejects (pos < θ), swept
/// over every score as a threshold and linearly interpolated between the
/// two thresholds that bracket the crossing.
double eer(std::span<const double> pos_scores, std::span<const double> neg_scores);

struct EvalReport {
  std::string task;
  std::string metric;  // cer | accuracy | eer
  double value = 0.0;
  std::size_t n_items = 0;
  std::uint64_t seed = 0;

  bool operator==(const EvalReport&) const = default;
};

/// True when smaller values are better.
bool lower_is_better(const std::string& metric);

inline constexpr const char* kReportCsvHeader = "task,metric,value,n_items,seed";
std::string to_csv_row(const EvalReport& r);
void write_reports_csv(std::ostream& os, std::span<const EvalReport> reports);

}  // namespace fusionkit
