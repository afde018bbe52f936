#include "fusionkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace fusionkit {

std::size_t edit_distance(std::span<const int> a, std::span<const int> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

double cer(const std::vector<std::vector<int>>& hyps, const std::vector<std::vector<int>>& refs) {
  if (hyps.size() != refs.size()) {
    throw std::invalid_argument("cer: " + std::to_string(hyps.size()) + " hypotheses vs " +
                                std::to_string(refs.size()) + " references");
  }
  std::size_t errors = 0, total = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    errors += edit_distance(hyps[i], refs[i]);
    total += refs[i].size();
  }
  if (total == 0) throw std::invalid_argument("cer: reference corpus is empty");
  return static_cast<double>(errors) / static_cast<double>(total);
}

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (preds.empty()) throw std::invalid_argument("accuracy: no items");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double eer(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) throw std::invalid_argument("eer: empty score list");
  std::vector<double> pos(pos_scores.begin(), pos_scores.end()), neg(neg_scores.begin(), neg_scores.end());
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> thresholds;
  thresholds.reserve(pos.size() + neg.size() + 1);
  thresholds.insert(thresholds.end(), pos.begin(), pos.end());
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
  auto far = [&](double th) {
    return static_cast<double>(neg.end() - std::lower_bound(neg.begin(), neg.end(), th)) / nn;
  };
  auto frr = [&](double th) {
    return static_cast<double>(std::lower_bound(pos.begin(), pos.end(), th) - pos.begin()) / np;
  };

  double prev_far = far(thresholds[0]), prev_frr = frr(thresholds[0]);
  if (prev_far <= prev_frr) return prev_far;
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const double fa = far(thresholds[i]), fr = frr(thresholds[i]);
    const double d = fa - fr;
    if (d == 0.0) return fa;
    if (d < 0.0) {
      const double d_prev = prev_far - prev_frr;
      const double lambda = d_prev / (d_prev - d);
      return prev_far + lambda * (fa - prev_far);
    }
    prev_far = fa;
    prev_frr = fr;
  }
  return prev_far;  // unreachable: the +inf threshold has FAR 0, FRR 1
}

bool lower_is_better(const std::string& metric) { return metric != "accuracy"; }

std::string to_csv_row(const EvalReport& r) {
  char value[64];
  std::snprintf(value, sizeof value, "%.10g", r.value);
  return r.task + "," + r.metric + "," + value + "," + std::to_string(r.n_items) + "," + std::to_string(r.seed);
}

void write_reports_csv(std::ostream& os, std::span<const EvalReport> reports) {
  os << kReportCsvHeader << '\n';
  for (const auto& r : reports) os << to_csv_row(r) << '\n';
}

}  // namespace fusionkit
