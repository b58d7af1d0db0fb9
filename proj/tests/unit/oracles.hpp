// Copyright 2026 The Cream NAS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reference implementations used as test oracles. They share no code with the
// library: plain loops over explicit index formulas.

#ifndef CREAM_TESTS_ORACLES_HPP
#define CREAM_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// Direct convolution, NCHW, zero padding k/2. groups == C for depthwise.
inline std::vector<double> conv(const std::vector<double>& x, int n, int c_in, int h, int w,
                                const std::vector<double>& weight, const std::vector<double>& bias, int c_out, int k,
                                int stride, bool depthwise, int& ho, int& wo) {
  const int pad = k / 2;
  ho = (h + 2 * pad - k) / stride + 1;
  wo = (w + 2 * pad - k) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(n) * c_out * ho * wo, 0.0);
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < c_out; ++o)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          double acc = bias[o];
          const int c_lo = depthwise ? o : 0;
          const int c_hi = depthwise ? o + 1 : c_in;
          for (int c = c_lo; c < c_hi; ++c)
            for (int u = 0; u < k; ++u)
              for (int v = 0; v < k; ++v) {
                const int r = i * stride - pad + u;
                const int s = j * stride - pad + v;
                if (r < 0 || r >= h || s < 0 || s >= w) continue;
                const int wc = depthwise ? 0 : c;
                const int wi_in = depthwise ? 1 : c_in;
                acc += weight[((o * wi_in + wc) * k + u) * k + v] * x[((b * c_in + c) * h + r) * w + s];
              }
          y[((b * c_out + o) * ho + i) * wo + j] = acc;
        }
  return y;
}

/// Tau-b by explicit enumeration of all ordered pairs i < j.
inline double kendall_brute(const std::vector<double>& x, const std::vector<double>& y) {
  long long c = 0, d = 0, tx = 0, ty = 0, n0 = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++n0;
      const int sx = (x[i] > x[j]) - (x[i] < x[j]);
      const int sy = (y[i] > y[j]) - (y[i] < y[j]);
      if (sx == 0) ++tx;
      if (sy == 0) ++ty;
      if (sx * sy > 0) ++c;
      if (sx * sy < 0) ++d;
    }
  return static_cast<double>(c - d) / std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
}

/// Central difference of f with respect to every entry of `v`.
inline std::vector<double> numeric_grad(std::vector<double>& v, const std::function<double()>& f, double eps = 1e-5) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + eps;
    const double up = f();
    v[i] = keep - eps;
    const double down = f();
    v[i] = keep;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

/// max |a - b| / max(1, max |b|) over the two vectors.
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / std::max(scale, 1e-8);
}

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

}  // namespace oracle

#endif  // CREAM_TESTS_ORACLES_HPP
