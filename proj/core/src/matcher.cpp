#include "fusionkit/matcher.hpp"

#include <algorithm>
#include <stdexcept>

#include "fusionkit/ops.hpp"

namespace fusionkit {

const char* to_string(DimRule r) {
  return r == DimRule::require_equal ? "require_equal" : "interpolate_to_max";
}

DimRule parse_dim_rule(const std::string& s) {
  if (s == "require_equal") return DimRule::require_equal;
  if (s == "interpolate_to_max") return DimRule::interpolate_to_max;
  throw std::invalid_argument("unknown dim_rule '" + s + "'");
}

Tensor resample_linear(const Tensor& x, std::size_t axis, std::size_t new_len) {
  if (axis >= x.rank()) {
    throw ShapeError("resample_linear: axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape()));
  }
  const std::size_t len = x.dim(axis);
  if (new_len == len) return x;
  if (new_len < len) {
    throw std::invalid_argument("resample_linear: downsampling " + std::to_string(len) + " -> " +
                                std::to_string(new_len) + " is not allowed");
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);

  // Per output index: left source index and weight of the right neighbour.
  std::vector<std::size_t> left(new_len);
  std::vector<double> frac(new_len);
  for (std::size_t j = 0; j < new_len; ++j) {
    if (len == 1) {
      left[j] = 0;
      frac[j] = 0.0;
      continue;
    }
    const double pos = static_cast<double>(j * (len - 1)) / static_cast<double>(new_len - 1);
    std::size_t i0 = static_cast<std::size_t>(pos);
    if (i0 >= len - 1) i0 = len - 1;
    left[j] = i0;
    frac[j] = pos - static_cast<double>(i0);
  }

  auto in = x.data();
  Shape shape = x.shape();
  shape[axis] = new_len;
  std::vector<double> out(outer * new_len * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < new_len; ++j) {
      const double* a = &in[(o * len + left[j]) * inner];
      double* dst = &out[(o * new_len + j) * inner];
      if (frac[j] == 0.0) {
        std::copy(a, a + inner, dst);
        continue;
      }
      const double* b = a + inner;
      const double f = frac[j];
      for (std::size_t i = 0; i < inner; ++i) dst[i] = a[i] * (1.0 - f) + b[i] * f;
    }
  }
  return Tensor::from(std::move(shape), std::move(out));
}

std::vector<HiddenStateBundle> match_bundles(std::span<const HiddenStateBundle> bundles, const MatchPolicy& policy) {
  if (bundles.empty()) throw std::invalid_argument("match_bundles: no bundles given");
  std::size_t L = 0, T = 0, D = 0;
  std::uint32_t framerate = 0;
  for (const auto& b : bundles) {
    L = std::max(L, b.layers());
    if (b.frames() > T) {
      T = b.frames();
      framerate = b.framerate_hz;
    }
    D = std::max(D, b.dim());
  }
  if (policy.dim_rule == DimRule::require_equal) {
    for (const auto& b : bundles) {
      if (b.dim() != bundles.front().dim()) {
        throw std::invalid_argument("match_bundles: feature dims differ (" + std::to_string(bundles.front().dim()) +
                                    " vs " + std::to_string(b.dim()) + ") under require_equal");
      }
    }
  }
  if (policy.target_rule == TargetRule::explicit_size) {
    if (policy.layers < L || policy.frames < T) {
      throw std::invalid_argument("match_bundles: explicit target " + std::to_string(policy.layers) + "x" +
                                  std::to_string(policy.frames) + " is smaller than an input (" + std::to_string(L) +
                                  "x" + std::to_string(T) + ")");
    }
    framerate = static_cast<std::uint32_t>(static_cast<std::uint64_t>(framerate) * policy.frames / T);
    if (framerate == 0) framerate = 1;
    L = policy.layers;
    T = policy.frames;
  }

  std::vector<HiddenStateBundle> out;
  out.reserve(bundles.size());
  for (const auto& b : bundles) {
    Tensor h = resample_linear(b.data, 0, L);
    h = resample_linear(h, 1, T);
    if (policy.dim_rule == DimRule::interpolate_to_max) h = resample_linear(h, 2, D);
    const std::uint32_t fr = h.dim(1) == b.frames() ? b.framerate_hz : framerate;
    out.emplace_back(b.model_id, fr, h);
  }
  return out;
}

namespace {

std::vector<Tensor> stacks_of(std::span<const HiddenStateBundle> aligned) {
  std::vector<Tensor> s;
  for (const auto& b : aligned) s.push_back(b.data);
  return s;
}

}  // namespace

Tensor merge_add(std::span<const Tensor> stacks) {
  if (stacks.empty()) throw std::invalid_argument("merge_add: no inputs");
  for (const auto& s : stacks) {
    if (s.shape() != stacks.front().shape()) {
      throw ShapeError("merge_add: shape mismatch " + shape_str(stacks.front().shape()) + " vs " +
                       shape_str(s.shape()) + " (bundles not matched)");
    }
  }
  Tensor acc = stacks.front();
  for (std::size_t i = 1; i < stacks.size(); ++i) acc = add(acc, stacks[i]);
  return acc;
}

Tensor merge_concat(std::span<const Tensor> stacks) {
  if (stacks.empty()) throw std::invalid_argument("merge_concat: no inputs");
  for (const auto& s : stacks) {
    if (s.rank() != 3 || s.dim(0) != stacks.front().dim(0) || s.dim(1) != stacks.front().dim(1)) {
      throw ShapeError("merge_concat: layer/frame mismatch " + shape_str(stacks.front().shape()) + " vs " +
                       shape_str(s.shape()));
    }
  }
  if (stacks.size() == 1) return stacks.front();
  return concat_last(stacks);
}

MergedStack merge_add(std::span<const HiddenStateBundle> aligned) {
  auto s = stacks_of(aligned);
  return {merge_add(std::span<const Tensor>(s)), aligned.size(), MergeKind::add};
}

MergedStack merge_concat(std::span<const HiddenStateBundle> aligned) {
  auto s = stacks_of(aligned);
  return {merge_concat(std::span<const Tensor>(s)), aligned.size(), MergeKind::concat};
}

}  // namespace fusionkit
