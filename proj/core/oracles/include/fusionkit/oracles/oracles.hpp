#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Slow, direct reference implementations. They share no code with the
// library routines they check.
namespace fusionkit::oracles {

/// -log Σ over every length-T path in {0..C-1}^T whose collapse (merge
/// repeats, drop blank 0) equals `labels`. `logprobs` is T×C row-major.
double ctc_bruteforce(std::span<const double> logprobs, std::size_t T, std::size_t C, std::span<const int> labels);

/// Endpoint-aligned linear upsampling of a 1-D sequence, written with
/// integer arithmetic for the source index.
std::vector<double> resample_scalar(std::span<const double> x, std::size_t new_len);

/// EER by scanning every candidate threshold with explicit counting loops.
double eer_sweep(std::span<const double> pos, std::span<const double> neg);

/// Levenshtein distance from the full (n+1)×(m+1) table.
std::size_t edit_distance_table(std::span<const int> a, std::span<const int> b);

/// Sliding-window cross-correlation of a C_in×S signal with C_out×C_in×K
/// kernels.
std::vector<double> conv1d_naive(std::span<const double> input, std::size_t c_in, std::size_t length,
                                 std::span<const double> kernels, std::size_t c_out, std::size_t kernel,
                                 std::size_t stride, std::size_t padding);

std::vector<double> matmul_naive(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
                                 std::size_t p);

}  // namespace fusionkit::oracles
