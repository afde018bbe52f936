#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "fusionkit/tensor.hpp"

namespace fusionkit {

enum class Elementwise { add, sub, mul, scale, gelu, tanh, relu };

/// Dispatching form of the elementwise family. Binary kinds take `b`, whose
/// shape must equal a's or be a suffix of it (broadcast along leading axes).
/// `scale` multiplies by `factor`.
Tensor elementwise(Elementwise kind, const Tensor& a, const std::optional<Tensor>& b = std::nullopt,
                   double factor = 1.0);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor gelu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);

/// (M×K) · (K×P) → M×P.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation of a C_in×S signal with C_out×C_in×K kernels.
Tensor conv1d(const Tensor& input, const Tensor& kernels, std::size_t stride, std::size_t padding);

/// Same contraction for a batch of signals laid out S×B×C_in (sequence axis
/// outermost, channels innermost); returns S_out×B×C_out.
Tensor conv1d_seq(const Tensor& input, const Tensor& kernels, std::size_t stride,
                  std::size_t padding);

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);

/// Concatenation along the last axis; all leading dimensions must agree.
Tensor concat_last(std::span<const Tensor> parts);

/// Rows [begin, begin + count) along axis 0.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);

/// out[t,d] = Σ_l w[l(,d)] · h[l,t,d] for h of shape L×T×D and weights of
/// shape L (shared over dimensions) or L×D (per dimension).
Tensor layer_mix(const Tensor& h, const Tensor& weights);

/// Forward value is `hard`; the gradient is routed to `soft` unchanged.
Tensor straight_through(const Tensor& soft, const Tensor& hard);

/// Mean of -logprobs[i, labels[i]] over the rows of an N×C matrix.
Tensor nll_loss(const Tensor& logprobs, std::span<const int> labels);

/// Rows of the last axis scaled to unit Euclidean norm.
Tensor l2_normalize(const Tensor& x);

}  // namespace fusionkit
