#include "fusionkit/oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fusionkit::oracles {

double ctc_bruteforce(std::span<const double> logprobs, std::size_t T, std::size_t C, std::span<const int> labels) {
  std::vector<std::size_t> path(T, 0);
  std::vector<int> collapsed(T);
  long double total = 0.0L;
  while (true) {
    std::size_t n = 0;
    int prev = -1;
    for (std::size_t t = 0; t < T; ++t) {
      const int s = static_cast<int>(path[t]);
      if (s != prev && s != 0) collapsed[n++] = s;
      prev = s;
    }
    if (n == labels.size() && std::equal(labels.begin(), labels.end(), collapsed.begin())) {
      long double lp = 0.0L;
      for (std::size_t t = 0; t < T; ++t) lp += logprobs[t * C + path[t]];
      total += std::exp(lp);
    }
    std::size_t t = 0;
    while (t < T && ++path[t] == C) path[t++] = 0;
    if (t == T) break;
  }
  return -static_cast<double>(std::log(total));
}

std::vector<double> resample_scalar(std::span<const double> x, std::size_t new_len) {
  const std::size_t len = x.size();
  std::vector<double> out(new_len);
  for (std::size_t j = 0; j < new_len; ++j) {
    if (len == 1) {
      out[j] = x[0];
      continue;
    }
    const std::size_t num = j * (len - 1), den = new_len - 1;
    const std::size_t i0 = num / den, rem = num % den;
    if (rem == 0) {
      out[j] = x[i0];
    } else {
      const double w = static_cast<double>(rem) / static_cast<double>(den);
      out[j] = x[i0] + w * (x[i0 + 1] - x[i0]);
    }
  }
  return out;
}

double eer_sweep(std::span<const double> pos, std::span<const double> neg) {
  std::vector<double> th;
  for (double s : pos) th.push_back(s);
  for (double s : neg) th.push_back(s);
  th.push_back(std::numeric_limits<double>::infinity());
  // Selection sort plus de-duplication, deliberately naive.
  for (std::size_t i = 0; i < th.size(); ++i)
    for (std::size_t j = i + 1; j < th.size(); ++j)
      if (th[j] < th[i]) std::swap(th[i], th[j]);
  std::vector<double> uniq;
  for (double t : th)
    if (uniq.empty() || uniq.back() != t) uniq.push_back(t);

  std::vector<double> far(uniq.size()), frr(uniq.size());
  for (std::size_t i = 0; i < uniq.size(); ++i) {
    std::size_t fa = 0, fr = 0;
    for (double s : neg) fa += s >= uniq[i];
    for (double s : pos) fr += s < uniq[i];
    far[i] = static_cast<double>(fa) / static_cast<double>(neg.size());
    frr[i] = static_cast<double>(fr) / static_cast<double>(pos.size());
  }
  for (std::size_t i = 0; i < uniq.size(); ++i) {
    if (far[i] > frr[i]) continue;
    if (far[i] == frr[i] || i == 0) return far[i];
    // FAR - FRR changes sign between i-1 and i; intersect the two segments.
    const double a0 = far[i - 1], a1 = far[i], r0 = frr[i - 1], r1 = frr[i];
    const double lambda = (a0 - r0) / ((a0 - r0) - (a1 - r1));
    return a0 + lambda * (a1 - a0);
  }
  return far.back();
}

std::size_t edit_distance_table(std::span<const int> a, std::span<const int> b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t best = d[i - 1][j] + 1;
      if (d[i][j - 1] + 1 < best) best = d[i][j - 1] + 1;
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] != b[j - 1]);
      if (sub < best) best = sub;
      d[i][j] = best;
    }
  return d[n][m];
}

std::vector<double> conv1d_naive(std::span<const double> input, std::size_t c_in, std::size_t length,
                                 std::span<const double> kernels, std::size_t c_out, std::size_t kernel,
                                 std::size_t stride, std::size_t padding) {
  const long padded = static_cast<long>(length + 2 * padding);
  const std::size_t out_len = static_cast<std::size_t>((padded - static_cast<long>(kernel)) / static_cast<long>(stride)) + 1;
  std::vector<double> out(c_out * out_len, 0.0);
  for (std::size_t co = 0; co < c_out; ++co)
    for (std::size_t o = 0; o < out_len; ++o) {
      double acc = 0.0;
      for (std::size_t ci = 0; ci < c_in; ++ci)
        for (std::size_t k = 0; k < kernel; ++k) {
          const long src = static_cast<long>(o * stride + k) - static_cast<long>(padding);
          if (src < 0 || src >= static_cast<long>(length)) continue;
          acc += kernels[(co * c_in + ci) * kernel + k] * input[ci * length + static_cast<std::size_t>(src)];
        }
      out[co * out_len + o] = acc;
    }
  return out;
}

std::vector<double> matmul_naive(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
                                 std::size_t p) {
  std::vector<double> out(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t q = 0; q < k; ++q) acc += a[i * k + q] * b[q * p + j];
      out[i * p + j] = acc;
    }
  return out;
}

}  // namespace fusionkit::oracles
