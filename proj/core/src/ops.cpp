#include "fusionkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace fusionkit {

namespace {

using detail::Node;

bool is_suffix(const Shape& full, const Shape& tail) {
  if (tail.size() > full.size()) return false;
  return std::equal(tail.rbegin(), tail.rend(), full.rbegin());
}

void check_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  if (!is_suffix(a.shape(), b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

template <class Fwd, class Dfn>
Tensor unary(const Tensor& a, Fwd fwd, Dfn dfn) {
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return Tensor::from_op(a.shape(), std::move(out), {a}, [dfn](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfn(p.data[i], self.data[i]);
  });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// outer × n × inner view of a tensor around `axis`.
struct AxisView {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

// Strided description of a batch of 1-D multichannel signals.
struct SignalLayout {
  std::size_t length, batch, channels;
  std::size_t s_len, s_batch, s_chan;
};

struct ConvGeometry {
  SignalLayout in, out;
  std::size_t kernel, stride, padding;
};

// Kernel C_out×C_in×K transposed to K×C_in×C_out so the innermost loop runs
// over contiguous output channels.
std::vector<double> kernel_kio(std::span<const double> w, std::size_t c_out, std::size_t c_in,
                               std::size_t k) {
  std::vector<double> t(w.size());
  for (std::size_t co = 0; co < c_out; ++co)
    for (std::size_t ci = 0; ci < c_in; ++ci)
      for (std::size_t kk = 0; kk < k; ++kk) t[(kk * c_in + ci) * c_out + co] = w[(co * c_in + ci) * k + kk];
  return t;
}

// Source position for output o and tap k, or npos when it falls in padding.
inline std::size_t tap_source(std::size_t o, std::size_t k, const ConvGeometry& g) {
  const std::size_t pos = o * g.stride + k;
  if (pos < g.padding || pos - g.padding >= g.in.length) return std::numeric_limits<std::size_t>::max();
  return pos - g.padding;
}

Tensor conv_impl(const Tensor& input, const Tensor& kernels, const ConvGeometry& geom, Shape out_shape) {
  const std::size_t c_in = geom.in.channels, c_out = geom.out.channels, K = geom.kernel;
  auto x = input.data();
  auto wt = kernel_kio(kernels.data(), c_out, c_in, K);
  std::vector<double> out(numel(out_shape), 0.0);
  for (std::size_t o = 0; o < geom.out.length; ++o) {
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t src = tap_source(o, k, geom);
      if (src == std::numeric_limits<std::size_t>::max()) continue;
      for (std::size_t b = 0; b < geom.in.batch; ++b) {
        const std::size_t xbase = src * geom.in.s_len + b * geom.in.s_batch;
        const std::size_t obase = o * geom.out.s_len + b * geom.out.s_batch;
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          const double xv = x[xbase + ci * geom.in.s_chan];
          const double* wrow = &wt[(k * c_in + ci) * c_out];
          for (std::size_t co = 0; co < c_out; ++co) out[obase + co * geom.out.s_chan] += wrow[co] * xv;
        }
      }
    }
  }
  return Tensor::from_op(std::move(out_shape), std::move(out), {input, kernels}, [geom](Node& self) {
    Node& xin = parent(self, 0);
    Node& wn = parent(self, 1);
    const std::size_t c_in = geom.in.channels, c_out = geom.out.channels, K = geom.kernel;
    const auto& g = self.grad;
    std::vector<double> wt;
    if (xin.requires_grad) wt = kernel_kio(wn.data, c_out, c_in, K);
    std::vector<double> gwt(wn.requires_grad ? wn.data.size() : 0, 0.0);
    std::vector<double>* gx = xin.requires_grad ? &xin.grad_buffer() : nullptr;
    for (std::size_t o = 0; o < geom.out.length; ++o) {
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t src = tap_source(o, k, geom);
        if (src == std::numeric_limits<std::size_t>::max()) continue;
        for (std::size_t b = 0; b < geom.in.batch; ++b) {
          const std::size_t xbase = src * geom.in.s_len + b * geom.in.s_batch;
          const std::size_t obase = o * geom.out.s_len + b * geom.out.s_batch;
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            const std::size_t xi = xbase + ci * geom.in.s_chan;
            const std::size_t row = (k * c_in + ci) * c_out;
            if (gx) {
              double acc = 0.0;
              for (std::size_t co = 0; co < c_out; ++co) acc += g[obase + co * geom.out.s_chan] * wt[row + co];
              (*gx)[xi] += acc;
            }
            if (!gwt.empty()) {
              const double xv = xin.data[xi];
              for (std::size_t co = 0; co < c_out; ++co) gwt[row + co] += g[obase + co * geom.out.s_chan] * xv;
            }
          }
        }
      }
    }
    if (!gwt.empty()) {
      auto& gw = wn.grad_buffer();
      for (std::size_t co = 0; co < c_out; ++co)
        for (std::size_t ci = 0; ci < c_in; ++ci)
          for (std::size_t k = 0; k < K; ++k) gw[(co * c_in + ci) * K + k] += gwt[(k * c_in + ci) * c_out + co];
    }
  });
}

void check_kernels(const char* op, const Tensor& kernels, std::size_t c_in, std::size_t length,
                   std::size_t stride, std::size_t padding) {
  if (kernels.rank() != 3 || kernels.dim(1) != c_in) {
    throw ShapeError(std::string(op) + ": kernels " + shape_str(kernels.shape()) +
                     " do not match " + std::to_string(c_in) + " input channels");
  }
  if (stride == 0) throw std::invalid_argument(std::string(op) + ": stride must be positive");
  if (kernels.dim(2) > length + 2 * padding) {
    throw ShapeError(std::string(op) + ": kernel length " + std::to_string(kernels.dim(2)) +
                     " exceeds padded signal length " + std::to_string(length + 2 * padding));
  }
}

}  // namespace

Tensor elementwise(Elementwise kind, const Tensor& a, const std::optional<Tensor>& b, double factor) {
  auto need_b = [&]() -> const Tensor& {
    if (!b) throw std::invalid_argument("binary elementwise operation needs a second operand");
    return *b;
  };
  switch (kind) {
    case Elementwise::add: return add(a, need_b());
    case Elementwise::sub: return sub(a, need_b());
    case Elementwise::mul: return mul(a, need_b());
    case Elementwise::scale: return scale(a, factor);
    case Elementwise::gelu: return gelu(a);
    case Elementwise::tanh: return tanh(a);
    case Elementwise::relu: return relu(a);
  }
  throw std::invalid_argument("unknown elementwise kind");
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_broadcast("add", a, b);
  auto x = a.data(), y = b.data();
  const std::size_t nb = y.size();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i % nb];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % nb] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_broadcast("sub", a, b);
  auto x = a.data(), y = b.data();
  const std::size_t nb = y.size();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i % nb];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % nb] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_broadcast("mul", a, b);
  auto x = a.data(), y = b.data();
  const std::size_t nb = y.size();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i % nb];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i % nb];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % nb] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor gelu(const Tensor& a) {
  return unary(a, gelu_value, [](double x, double) { return gelu_derivative(x); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner-dimension mismatch " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t M = a.dim(0), K = a.dim(1), P = b.dim(1);
  auto x = a.data(), y = b.data();
  std::vector<double> out(M * P, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    double* orow = &out[i * P];
    for (std::size_t k = 0; k < K; ++k) {
      const double av = x[i * K + k];
      const double* brow = &y[k * P];
      for (std::size_t j = 0; j < P; ++j) orow[j] += av * brow[j];
    }
  }
  return Tensor::from_op({M, P}, std::move(out), {a, b}, [M, K, P](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const auto& g = self.grad;
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < P; ++j) acc += g[i * P + j] * pb.data[k * P + j];
          ga[i * K + k] += acc;
        }
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          const double av = pa.data[i * K + k];
          for (std::size_t j = 0; j < P; ++j) gb[k * P + j] += av * g[i * P + j];
        }
    }
  });
}

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0 || kernel > length + 2 * padding) return 0;
  return (length + 2 * padding - kernel) / stride + 1;
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, std::size_t stride, std::size_t padding) {
  if (input.rank() != 2) throw ShapeError("conv1d: input must be C_in×S, got " + shape_str(input.shape()));
  const std::size_t c_in = input.dim(0), S = input.dim(1);
  check_kernels("conv1d", kernels, c_in, S, stride, padding);
  const std::size_t c_out = kernels.dim(0), K = kernels.dim(2);
  const std::size_t S_out = conv_output_length(S, K, stride, padding);
  ConvGeometry g{{S, 1, c_in, 1, 0, S}, {S_out, 1, c_out, 1, 0, S_out}, K, stride, padding};
  return conv_impl(input, kernels, g, {c_out, S_out});
}

Tensor conv1d_seq(const Tensor& input, const Tensor& kernels, std::size_t stride, std::size_t padding) {
  if (input.rank() != 3) {
    throw ShapeError("conv1d_seq: input must be S×B×C_in, got " + shape_str(input.shape()));
  }
  const std::size_t S = input.dim(0), B = input.dim(1), c_in = input.dim(2);
  check_kernels("conv1d_seq", kernels, c_in, S, stride, padding);
  const std::size_t c_out = kernels.dim(0), K = kernels.dim(2);
  const std::size_t S_out = conv_output_length(S, K, stride, padding);
  ConvGeometry g{{S, B, c_in, B * c_in, c_in, 1}, {S_out, B, c_out, B * c_out, c_out, 1}, K, stride, padding};
  return conv_impl(input, kernels, g, {S_out, B, c_out});
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto v = axis_view(x.shape(), axis);
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < v.n; ++k) {
        const double val = in[base + k * v.inner];
        if (std::isnan(val)) throw std::domain_error("softmax: NaN input");
        mx = std::max(mx, val);
      }
      double z = 0.0;
      for (std::size_t k = 0; k < v.n; ++k) {
        const double e = std::exp(in[base + k * v.inner] - mx);
        out[base + k * v.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < v.n; ++k) out[base + k * v.inner] /= z;
    }
  return Tensor::from_op(x.shape(), std::move(out), {x}, [v](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.n * v.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < v.n; ++k) dot += self.grad[base + k * v.inner] * self.data[base + k * v.inner];
        for (std::size_t k = 0; k < v.n; ++k) {
          const std::size_t idx = base + k * v.inner;
          g[idx] += self.data[idx] * (self.grad[idx] - dot);
        }
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const auto v = axis_view(x.shape(), axis);
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < v.n; ++k) {
        const double val = in[base + k * v.inner];
        if (std::isnan(val)) throw std::domain_error("log_softmax: NaN input");
        mx = std::max(mx, val);
      }
      double z = 0.0;
      for (std::size_t k = 0; k < v.n; ++k) z += std::exp(in[base + k * v.inner] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t k = 0; k < v.n; ++k) out[base + k * v.inner] = in[base + k * v.inner] - lz;
    }
  return Tensor::from_op(x.shape(), std::move(out), {x}, [v](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.n * v.inner + i;
        double gsum = 0.0;
        for (std::size_t k = 0; k < v.n; ++k) gsum += self.grad[base + k * v.inner];
        for (std::size_t k = 0; k < v.n; ++k) {
          const std::size_t idx = base + k * v.inner;
          g[idx] += self.grad[idx] - std::exp(self.data[idx]) * gsum;
        }
      }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::from_op({}, {s}, {x}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const auto v = axis_view(x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  auto in = x.data();
  std::vector<double> out(v.outer * v.inner, 0.0);
  const double inv = 1.0 / static_cast<double>(v.n);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t k = 0; k < v.n; ++k)
      for (std::size_t i = 0; i < v.inner; ++i) out[o * v.inner + i] += in[(o * v.n + k) * v.inner + i];
  for (auto& val : out) val *= inv;
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [v, inv](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t k = 0; k < v.n; ++k)
        for (std::size_t i = 0; i < v.inner; ++i) g[(o * v.n + k) * v.inner + i] += self.grad[o * v.inner + i] * inv;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last: no inputs");
  const Shape& first = parts[0].shape();
  if (first.empty()) throw ShapeError("concat_last: scalar input");
  Shape lead(first.begin(), first.end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      throw ShapeError("concat_last: shape mismatch " + shape_str(first) + " vs " + shape_str(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  const std::size_t rows = numel(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto d = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(r * widths[k]), widths[k],
                  out.begin() + static_cast<std::ptrdiff_t>(r * total + offset));
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return Tensor::from_op(std::move(shape), std::move(out), std::move(parents),
                         [widths, rows, total](Node& self) {
                           std::size_t offset = 0;
                           for (std::size_t k = 0; k < widths.size(); ++k) {
                             Node& p = parent(self, k);
                             if (p.requires_grad) {
                               auto& g = p.grad_buffer();
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t c = 0; c < widths[k]; ++c)
                                   g[r * widths[k] + c] += self.grad[r * total + offset + c];
                             }
                             offset += widths[k];
                           }
                         });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  if (x.rank() == 0 || count == 0 || begin + count > x.dim(0)) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t row = x.size() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = count;
  auto d = x.data();
  std::vector<double> out(d.begin() + static_cast<std::ptrdiff_t>(begin * row),
                          d.begin() + static_cast<std::ptrdiff_t>((begin + count) * row));
  const std::size_t offset = begin * row;
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [offset](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
  });
}

Tensor layer_mix(const Tensor& h, const Tensor& weights) {
  if (h.rank() != 3) throw ShapeError("layer_mix: hidden states must be L×T×D, got " + shape_str(h.shape()));
  const std::size_t L = h.dim(0), T = h.dim(1), D = h.dim(2);
  const bool per_dim = weights.rank() == 2;
  if (!((weights.rank() == 1 && weights.dim(0) == L) || (per_dim && weights.dim(0) == L && weights.dim(1) == D))) {
    throw ShapeError("layer_mix: weights " + shape_str(weights.shape()) + " do not match hidden states " +
                     shape_str(h.shape()));
  }
  auto hd = h.data(), w = weights.data();
  std::vector<double> out(T * D, 0.0);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t t = 0; t < T; ++t) {
      const double* hrow = &hd[(l * T + t) * D];
      double* orow = &out[t * D];
      if (per_dim) {
        const double* wrow = &w[l * D];
        for (std::size_t d = 0; d < D; ++d) orow[d] += wrow[d] * hrow[d];
      } else {
        const double wl = w[l];
        for (std::size_t d = 0; d < D; ++d) orow[d] += wl * hrow[d];
      }
    }
  return Tensor::from_op({T, D}, std::move(out), {h, weights}, [L, T, D, per_dim](Node& self) {
    Node& ph = parent(self, 0);
    Node& pw = parent(self, 1);
    const auto& g = self.grad;
    if (ph.requires_grad) {
      auto& gh = ph.grad_buffer();
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t d = 0; d < D; ++d)
            gh[(l * T + t) * D + d] += g[t * D + d] * (per_dim ? pw.data[l * D + d] : pw.data[l]);
    }
    if (pw.requires_grad) {
      auto& gw = pw.grad_buffer();
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t d = 0; d < D; ++d) {
            const double c = g[t * D + d] * ph.data[(l * T + t) * D + d];
            if (per_dim) gw[l * D + d] += c;
            else gw[l] += c;
          }
    }
  });
}

Tensor straight_through(const Tensor& soft, const Tensor& hard) {
  if (soft.shape() != hard.shape()) {
    throw ShapeError("straight_through: shape mismatch " + shape_str(soft.shape()) + " vs " +
                     shape_str(hard.shape()));
  }
  std::vector<double> out(hard.data().begin(), hard.data().end());
  return Tensor::from_op(soft.shape(), std::move(out), {soft}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor nll_loss(const Tensor& logprobs, std::span<const int> labels) {
  if (logprobs.rank() != 2 || logprobs.dim(0) != labels.size()) {
    throw ShapeError("nll_loss: logprobs " + shape_str(logprobs.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t N = logprobs.dim(0), C = logprobs.dim(1);
  std::vector<int> targets(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= C) {
      throw std::out_of_range("nll_loss: label " + std::to_string(targets[i]) + " outside [0, " +
                              std::to_string(C) + ")");
    }
    total -= logprobs.data()[i * C + static_cast<std::size_t>(targets[i])];
  }
  const double inv = 1.0 / static_cast<double>(N);
  return Tensor::from_op({}, {total * inv}, {logprobs}, [targets, C, inv](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < targets.size(); ++i) g[i * C + static_cast<std::size_t>(targets[i])] -= self.grad[0] * inv;
  });
}

Tensor l2_normalize(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("l2_normalize: scalar input");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  auto in = x.data();
  std::vector<double> out(in.size());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < width; ++c) s += in[r * width + c] * in[r * width + c];
    const double n = std::sqrt(s);
    if (!(n > 0.0)) throw std::domain_error("l2_normalize: zero-norm row");
    norms[r] = n;
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = in[r * width + c] / n;
  }
  return Tensor::from_op(x.shape(), std::move(out), {x}, [norms, width](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t r = 0; r < norms.size(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < width; ++c) dot += self.grad[r * width + c] * self.data[r * width + c];
      for (std::size_t c = 0; c < width; ++c) {
        const std::size_t i = r * width + c;
        g[i] += (self.grad[i] - self.data[i] * dot) / norms[r];
      }
    }
  });
}

}  // namespace fusionkit
