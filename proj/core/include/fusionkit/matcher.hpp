#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fusionkit/bundle.hpp"
#include "fusionkit/tensor.hpp"

namespace fusionkit {

enum class TargetRule { max_of_inputs, explicit_size };
enum class DimRule { require_equal, interpolate_to_max };

const char* to_string(DimRule r);
DimRule parse_dim_rule(const std::string& s);

struct MatchPolicy {
  TargetRule target_rule = TargetRule::max_of_inputs;
  std::size_t layers = 0;  // explicit targets; ignored for max_of_inputs
  std::size_t frames = 0;
  DimRule dim_rule = DimRule::require_equal;

  bool operator==(const MatchPolicy&) const = default;
};

/// Endpoint-aligned linear upsampling along `axis`: output index j reads
/// source coordinate j·(len-1)/(new_len-1). Equal lengths return `x`
/// itself; a length-1 axis is broadcast. Never records a gradient.
Tensor resample_linear(const Tensor& x, std::size_t axis, std::size_t new_len);

/// Brings every bundle to the common (L, T) target, interpolating layers
/// first, then time, then (under interpolate_to_max) the feature axis.
std::vector<HiddenStateBundle> match_bundles(std::span<const HiddenStateBundle> bundles, const MatchPolicy& policy);

enum class MergeKind { add, concat };

struct MergedStack {
  Tensor data;  // L×T×C
  std::size_t n_models = 0;
  MergeKind kind = MergeKind::add;
};

MergedStack merge_add(std::span<const HiddenStateBundle> aligned);
MergedStack merge_concat(std::span<const HiddenStateBundle> aligned);

/// Tensor-level forms used inside interfaces (stacks of shape L×T×D_i).
Tensor merge_add(std::span<const Tensor> stacks);
Tensor merge_concat(std::span<const Tensor> stacks);

}  // namespace fusionkit
