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

// Layer forward/backward passes, losses and plain SGD.
//
// Everything here is a pure function of its arguments. Tensors are float32 for
// training; the same templates instantiate with double for gradient checks.

#ifndef CREAM_NUMERICS_HPP
#define CREAM_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "cream/error.hpp"
#include "cream/tensor.hpp"

namespace cream {

enum class LayerKind { conv2d, depthwise_conv2d, dense, relu, global_avg_pool, add };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int kernel = 1;
  int stride = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;

  static LayerSpec conv(std::size_t in, std::size_t out, int kernel, int stride = 1) {
    return {LayerKind::conv2d, kernel, stride, in, out};
  }
  static LayerSpec depthwise(std::size_t channels, int kernel, int stride = 1) {
    return {LayerKind::depthwise_conv2d, kernel, stride, channels, channels};
  }
  static LayerSpec dense(std::size_t in, std::size_t out) { return {LayerKind::dense, 1, 1, in, out}; }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec global_avg_pool() { return {LayerKind::global_avg_pool}; }
  static LayerSpec add() { return {LayerKind::add}; }

  int padding() const noexcept { return kernel / 2; }
  bool has_params() const noexcept {
    return kind == LayerKind::conv2d || kind == LayerKind::depthwise_conv2d || kind == LayerKind::dense;
  }
  /// Throws ShapeError when kernel/stride/channels are inconsistent.
  void validate() const;
  /// Inputs per output unit; used for weight init scaling.
  std::size_t fan_in() const;
  Dims weight_dims() const;
  Dims bias_dims() const { return {out_channels}; }
  /// Output shape for an input of shape `in`; throws ShapeError on mismatch.
  Dims output_dims(const Dims& in) const;
  /// Spatial extent after this layer (same-padding, ceil for stride 2).
  std::size_t output_extent(std::size_t extent) const {
    return (extent + 2 * static_cast<std::size_t>(padding()) - static_cast<std::size_t>(kernel)) /
               static_cast<std::size_t>(stride) +
           1;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <typename Real>
struct ActivationCache {
  LayerKind kind = LayerKind::relu;
  Dims input_dims;
  BasicTensor<Real> input;  // kept for conv, dense and relu
  bool filled = false;
};

template <typename Real>
struct LayerOutput {
  BasicTensor<Real> y;
  ActivationCache<Real> cache;
};

template <typename Real>
struct LayerGrads {
  BasicTensor<Real> grad_x;
  BasicParamSet<Real> grad_params;
  std::optional<BasicTensor<Real>> grad_other;  // second operand of `add`
};

template <typename Real>
struct LossResult {
  double loss = 0.0;
  BasicTensor<Real> grad_logits;
};

namespace detail {

template <typename Real>
void require_finite(const BasicTensor<Real>& t, const char* what) {
  if (!t.all_finite()) throw NonFiniteError(std::string("non-finite values in ") + what);
}

template <typename Real>
const BasicTensor<Real>& param(const BasicParamSet<Real>& params, const char* name, const Dims& dims) {
  auto it = params.find(name);
  if (it == params.end()) throw ShapeError(std::string("missing parameter '") + name + "'");
  if (it->second.dims() != dims) {
    throw ShapeError(std::string("parameter '") + name + "' has dims " + dims_string(it->second.dims()) +
                     ", expected " + dims_string(dims));
  }
  require_finite(it->second, name);
  return it->second;
}

// Output columns [lo, hi) whose input column o*stride - pad + k lies inside [0, extent).
inline void valid_range(std::size_t out_extent, std::size_t extent, int stride, int pad, int k, std::size_t& lo,
                        std::size_t& hi) {
  const long off = static_cast<long>(k) - pad;
  long l = off >= 0 ? 0 : (-off + stride - 1) / stride;
  long h = (static_cast<long>(extent) - 1 - off);
  h = h < 0 ? -1 : h / stride;
  lo = static_cast<std::size_t>(std::max<long>(l, 0));
  hi = static_cast<std::size_t>(std::min<long>(h + 1, static_cast<long>(out_extent)));
  if (hi < lo) hi = lo;
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, ho, wo;
  int k, stride, pad;
  bool depthwise;
};

template <typename Real>
void conv_forward(const ConvGeometry& g, const Real* x, const Real* wt, const Real* bias, Real* y) {
  const std::size_t plane_out = g.ho * g.wo;
  const std::size_t plane_in = g.h * g.w;
  const std::size_t kk = static_cast<std::size_t>(g.k) * g.k;
  const bool pointwise = g.k == 1 && g.stride == 1;
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      Real* yp = y + (n * g.cout + co) * plane_out;
      std::fill(yp, yp + plane_out, bias[co]);
      const std::size_t ci_begin = g.depthwise ? co : 0;
      const std::size_t ci_end = g.depthwise ? co + 1 : g.cin;
      for (std::size_t ci = ci_begin; ci < ci_end; ++ci) {
        const Real* xp = x + (n * g.cin + ci) * plane_in;
        const Real* wp = wt + (g.depthwise ? co * kk : (co * g.cin + ci) * kk);
        if (pointwise) {
          const Real wv = wp[0];
          for (std::size_t i = 0; i < plane_out; ++i) yp[i] += wv * xp[i];
          continue;
        }
        for (int kh = 0; kh < g.k; ++kh) {
          std::size_t oh_lo, oh_hi;
          valid_range(g.ho, g.h, g.stride, g.pad, kh, oh_lo, oh_hi);
          for (int kw = 0; kw < g.k; ++kw) {
            std::size_t ow_lo, ow_hi;
            valid_range(g.wo, g.w, g.stride, g.pad, kw, ow_lo, ow_hi);
            const Real wv = wp[kh * g.k + kw];
            for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * g.stride + kh - g.pad;
              const Real* xr = xp + ih * static_cast<std::ptrdiff_t>(g.w);
              Real* yr = yp + oh * g.wo;
              const std::ptrdiff_t col0 = kw - g.pad;
              if (g.stride == 1) {
                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) yr[ow] += wv * xr[static_cast<std::ptrdiff_t>(ow) + col0];
              } else {
                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                  yr[ow] += wv * xr[static_cast<std::ptrdiff_t>(ow) * g.stride + col0];
                }
              }
            }
          }
        }
      }
    }
  }
}

template <typename Real>
void conv_backward(const ConvGeometry& g, const Real* x, const Real* wt, const Real* gy, Real* gx, Real* gw,
                   Real* gb) {
  const std::size_t plane_out = g.ho * g.wo;
  const std::size_t plane_in = g.h * g.w;
  const std::size_t kk = static_cast<std::size_t>(g.k) * g.k;
  const bool pointwise = g.k == 1 && g.stride == 1;
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      const Real* gyp = gy + (n * g.cout + co) * plane_out;
      Real bsum = 0;
      for (std::size_t i = 0; i < plane_out; ++i) bsum += gyp[i];
      gb[co] += bsum;
      const std::size_t ci_begin = g.depthwise ? co : 0;
      const std::size_t ci_end = g.depthwise ? co + 1 : g.cin;
      for (std::size_t ci = ci_begin; ci < ci_end; ++ci) {
        const Real* xp = x + (n * g.cin + ci) * plane_in;
        Real* gxp = gx + (n * g.cin + ci) * plane_in;
        const std::size_t woff = g.depthwise ? co * kk : (co * g.cin + ci) * kk;
        const Real* wp = wt + woff;
        Real* gwp = gw + woff;
        if (pointwise) {
          const Real wv = wp[0];
          Real acc = 0;
          for (std::size_t i = 0; i < plane_out; ++i) {
            gxp[i] += wv * gyp[i];
            acc += gyp[i] * xp[i];
          }
          gwp[0] += acc;
          continue;
        }
        for (int kh = 0; kh < g.k; ++kh) {
          std::size_t oh_lo, oh_hi;
          valid_range(g.ho, g.h, g.stride, g.pad, kh, oh_lo, oh_hi);
          for (int kw = 0; kw < g.k; ++kw) {
            std::size_t ow_lo, ow_hi;
            valid_range(g.wo, g.w, g.stride, g.pad, kw, ow_lo, ow_hi);
            const Real wv = wp[kh * g.k + kw];
            Real acc = 0;
            for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * g.stride + kh - g.pad;
              const Real* xr = xp + ih * static_cast<std::ptrdiff_t>(g.w);
              Real* gxr = gxp + ih * static_cast<std::ptrdiff_t>(g.w);
              const Real* gyr = gyp + oh * g.wo;
              for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow) * g.stride + kw - g.pad;
                gxr[iw] += wv * gyr[ow];
                acc += gyr[ow] * xr[iw];
              }
            }
            gwp[kh * g.k + kw] += acc;
          }
        }
      }
    }
  }
}

template <typename Real>
BasicTensor<Real> forward_values(const LayerSpec& layer, const BasicParamSet<Real>& params,
                                 const BasicTensor<Real>& x) {
  const Dims out_dims = layer.output_dims(x.dims());
  switch (layer.kind) {
    case LayerKind::conv2d:
    case LayerKind::depthwise_conv2d: {
      const auto& w = param(params, "weight", layer.weight_dims());
      const auto& b = param(params, "bias", layer.bias_dims());
      BasicTensor<Real> y(out_dims);
      ConvGeometry g{x.dim(0), x.dim(1), x.dim(2),   x.dim(3),     out_dims[1],
                     out_dims[2], out_dims[3], layer.kernel, layer.stride, layer.padding(),
                     layer.kind == LayerKind::depthwise_conv2d};
      conv_forward(g, x.raw(), w.raw(), b.raw(), y.raw());
      return y;
    }
    case LayerKind::dense: {
      const auto& w = param(params, "weight", layer.weight_dims());
      const auto& b = param(params, "bias", layer.bias_dims());
      BasicTensor<Real> y(out_dims);
      const std::size_t n = x.dim(0), in = layer.in_channels, out = layer.out_channels;
      for (std::size_t r = 0; r < n; ++r) {
        const Real* xr = x.raw() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
          const Real* wr = w.raw() + o * in;
          Real acc = b[o];
          for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
          y[r * out + o] = acc;
        }
      }
      return y;
    }
    case LayerKind::relu: {
      BasicTensor<Real> y(out_dims);
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > Real(0) ? x[i] : Real(0);
      return y;
    }
    case LayerKind::global_avg_pool: {
      BasicTensor<Real> y(out_dims);
      const std::size_t plane = x.dim(2) * x.dim(3);
      const Real inv = Real(1) / static_cast<Real>(plane);
      for (std::size_t nc = 0; nc < out_dims[0] * out_dims[1]; ++nc) {
        const Real* p = x.raw() + nc * plane;
        Real acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        y[nc] = acc * inv;
      }
      return y;
    }
    case LayerKind::add:
      throw ShapeError("add takes two operands");
  }
  throw ShapeError("unknown layer kind");
}

}  // namespace detail

inline std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::depthwise_conv2d: return "depthwise_conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::add: return "add";
  }
  return "?";
}

inline void LayerSpec::validate() const {
  if (kernel < 1 || kernel % 2 == 0) throw ShapeError("kernel must be odd and >= 1, got " + std::to_string(kernel));
  if (stride != 1 && stride != 2) throw ShapeError("stride must be 1 or 2, got " + std::to_string(stride));
  if (in_channels == 0 || out_channels == 0) throw ShapeError("channels must be positive");
  if (kind == LayerKind::depthwise_conv2d && in_channels != out_channels) {
    throw ShapeError("depthwise layer requires in_channels == out_channels");
  }
}

inline std::size_t LayerSpec::fan_in() const {
  switch (kind) {
    case LayerKind::conv2d: return in_channels * kernel * kernel;
    case LayerKind::depthwise_conv2d: return static_cast<std::size_t>(kernel) * kernel;
    case LayerKind::dense: return in_channels;
    default: return 1;
  }
}

inline Dims LayerSpec::weight_dims() const {
  const auto k = static_cast<std::size_t>(kernel);
  switch (kind) {
    case LayerKind::conv2d: return {out_channels, in_channels, k, k};
    case LayerKind::depthwise_conv2d: return {out_channels, 1, k, k};
    case LayerKind::dense: return {out_channels, in_channels};
    default: return {};
  }
}

inline Dims LayerSpec::output_dims(const Dims& in) const {
  validate();
  auto mismatch = [&](const std::string& why) {
    return ShapeError(to_string(kind) + " input " + dims_string(in) + ": " + why);
  };
  switch (kind) {
    case LayerKind::conv2d:
    case LayerKind::depthwise_conv2d:
      if (in.size() != 4) throw mismatch("expected rank 4 (NCHW)");
      if (in[1] != in_channels) throw mismatch("expected " + std::to_string(in_channels) + " channels");
      return {in[0], out_channels, output_extent(in[2]), output_extent(in[3])};
    case LayerKind::dense:
      if (in.size() != 2) throw mismatch("expected rank 2");
      if (in[1] != in_channels) throw mismatch("expected " + std::to_string(in_channels) + " features");
      return {in[0], out_channels};
    case LayerKind::global_avg_pool:
      if (in.size() != 4) throw mismatch("expected rank 4 (NCHW)");
      return {in[0], in[1]};
    case LayerKind::relu:
    case LayerKind::add:
      return in;
  }
  throw mismatch("unknown kind");
}

/// Forward pass that keeps what `backward` needs.
template <typename Real>
LayerOutput<Real> forward(const LayerSpec& layer, const BasicParamSet<Real>& params, const BasicTensor<Real>& x) {
  detail::require_finite(x, "layer input");
  LayerOutput<Real> out;
  out.y = detail::forward_values(layer, params, x);
  out.cache.kind = layer.kind;
  out.cache.input_dims = x.dims();
  if (layer.kind != LayerKind::global_avg_pool) out.cache.input = x;
  out.cache.filled = true;
  return out;
}

/// Residual add: y = x + other.
template <typename Real>
LayerOutput<Real> forward(const LayerSpec& layer, const BasicParamSet<Real>&, const BasicTensor<Real>& x,
                          const BasicTensor<Real>& other) {
  if (layer.kind != LayerKind::add) throw ShapeError("two-operand forward is only defined for add");
  if (x.dims() != other.dims()) {
    throw ShapeError("add operands differ: " + dims_string(x.dims()) + " vs " + dims_string(other.dims()));
  }
  detail::require_finite(x, "layer input");
  detail::require_finite(other, "layer input");
  LayerOutput<Real> out;
  out.y = x;
  for (std::size_t i = 0; i < x.size(); ++i) out.y[i] += other[i];
  out.cache.kind = LayerKind::add;
  out.cache.input_dims = x.dims();
  out.cache.filled = true;
  return out;
}

/// Forward pass without a cache, for evaluation.
template <typename Real>
BasicTensor<Real> infer(const LayerSpec& layer, const BasicParamSet<Real>& params, const BasicTensor<Real>& x) {
  return detail::forward_values(layer, params, x);
}

template <typename Real>
LayerGrads<Real> backward(const LayerSpec& layer, const BasicParamSet<Real>& params,
                          const ActivationCache<Real>& cache, const BasicTensor<Real>& grad_y) {
  if (!cache.filled) throw ShapeError("backward called without a forward cache");
  if (cache.kind != layer.kind) throw ShapeError("cache was produced by a different layer kind");
  const Dims out_dims = layer.output_dims(cache.input_dims);
  if (grad_y.dims() != out_dims) {
    throw ShapeError("grad_y dims " + dims_string(grad_y.dims()) + " do not match output " + dims_string(out_dims));
  }
  LayerGrads<Real> g;
  g.grad_x = BasicTensor<Real>(cache.input_dims);
  const auto& x = cache.input;
  switch (layer.kind) {
    case LayerKind::conv2d:
    case LayerKind::depthwise_conv2d: {
      const auto& w = detail::param(params, "weight", layer.weight_dims());
      BasicTensor<Real> gw(layer.weight_dims());
      BasicTensor<Real> gb(layer.bias_dims());
      detail::ConvGeometry geo{x.dim(0),    x.dim(1),    x.dim(2),     x.dim(3),     out_dims[1],
                               out_dims[2], out_dims[3], layer.kernel, layer.stride, layer.padding(),
                               layer.kind == LayerKind::depthwise_conv2d};
      detail::conv_backward(geo, x.raw(), w.raw(), grad_y.raw(), g.grad_x.raw(), gw.raw(), gb.raw());
      g.grad_params.emplace("weight", std::move(gw));
      g.grad_params.emplace("bias", std::move(gb));
      break;
    }
    case LayerKind::dense: {
      const auto& w = detail::param(params, "weight", layer.weight_dims());
      BasicTensor<Real> gw(layer.weight_dims());
      BasicTensor<Real> gb(layer.bias_dims());
      const std::size_t n = x.dim(0), in = layer.in_channels, out = layer.out_channels;
      for (std::size_t r = 0; r < n; ++r) {
        const Real* xr = x.raw() + r * in;
        Real* gxr = g.grad_x.raw() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
          const Real gyv = grad_y[r * out + o];
          const Real* wr = w.raw() + o * in;
          Real* gwr = gw.raw() + o * in;
          gb[o] += gyv;
          for (std::size_t i = 0; i < in; ++i) {
            gxr[i] += wr[i] * gyv;
            gwr[i] += gyv * xr[i];
          }
        }
      }
      g.grad_params.emplace("weight", std::move(gw));
      g.grad_params.emplace("bias", std::move(gb));
      break;
    }
    case LayerKind::relu:
      for (std::size_t i = 0; i < x.size(); ++i) g.grad_x[i] = x[i] > Real(0) ? grad_y[i] : Real(0);
      break;
    case LayerKind::global_avg_pool: {
      const std::size_t plane = cache.input_dims[2] * cache.input_dims[3];
      const Real inv = Real(1) / static_cast<Real>(plane);
      for (std::size_t nc = 0; nc < out_dims[0] * out_dims[1]; ++nc) {
        const Real v = grad_y[nc] * inv;
        std::fill(g.grad_x.raw() + nc * plane, g.grad_x.raw() + (nc + 1) * plane, v);
      }
      break;
    }
    case LayerKind::add:
      g.grad_x = grad_y;
      g.grad_other = grad_y;
      break;
  }
  return g;
}

/// Row-wise softmax of a [N, C] tensor, computed in double after subtracting the row max.
template <typename Real>
BasicTensor<Real> softmax(const BasicTensor<Real>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects [N, C] logits, got " + dims_string(logits.dims()));
  detail::require_finite(logits, "logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  BasicTensor<Real> p(logits.dims());
  for (std::size_t r = 0; r < n; ++r) {
    const Real* z = logits.raw() + r * c;
    const double zmax = *std::max_element(z, z + c);
    double sum = 0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(z[j]) - zmax);
    for (std::size_t j = 0; j < c; ++j) p[r * c + j] = static_cast<Real>(std::exp(static_cast<double>(z[j]) - zmax) / sum);
  }
  return p;
}

namespace detail {

template <typename Real>
double log_sum_exp(const Real* z, std::size_t c) {
  const double zmax = *std::max_element(z, z + c);
  double sum = 0;
  for (std::size_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(z[j]) - zmax);
  return zmax + std::log(sum);
}

// Tolerance for "rows sum to one": 1e-6, widened to the rounding floor of Real.
template <typename Real>
double normalization_tolerance(std::size_t classes) {
  return std::max(1e-6, 4.0 * static_cast<double>(classes) * std::numeric_limits<Real>::epsilon());
}

}  // namespace detail

/// Mean cross entropy against hard labels; gradient is (softmax - onehot) / N.
template <typename Real>
LossResult<Real> cross_entropy(const BasicTensor<Real>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy expects [N, C] logits");
  detail::require_finite(logits, "logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) throw ShapeError("label count does not match batch size");
  LossResult<Real> out;
  out.grad_logits = BasicTensor<Real>(logits.dims());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw ShapeError("label " + std::to_string(y) + " out of range [0, " + std::to_string(c) + ")");
    }
    const Real* z = logits.raw() + r * c;
    const double lse = detail::log_sum_exp(z, c);
    out.loss += (lse - static_cast<double>(z[y])) * inv_n;
    for (std::size_t j = 0; j < c; ++j) {
      const double pj = std::exp(static_cast<double>(z[j]) - lse);
      out.grad_logits[r * c + j] = static_cast<Real>((pj - (static_cast<int>(j) == y ? 1.0 : 0.0)) * inv_n);
    }
  }
  return out;
}

/// Mean cross entropy against soft targets q: -sum_c q_c log p_c; gradient (p - q) / N.
template <typename Real>
LossResult<Real> soft_cross_entropy(const BasicTensor<Real>& student_logits, const BasicTensor<Real>& teacher_probs) {
  if (student_logits.rank() != 2) throw ShapeError("soft_cross_entropy expects [N, C] logits");
  if (student_logits.dims() != teacher_probs.dims()) throw ShapeError("student and teacher shapes differ");
  detail::require_finite(student_logits, "logits");
  detail::require_finite(teacher_probs, "teacher probabilities");
  const std::size_t n = student_logits.dim(0), c = student_logits.dim(1);
  const double tol = detail::normalization_tolerance<Real>(c);
  LossResult<Real> out;
  out.grad_logits = BasicTensor<Real>(student_logits.dims());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Real* q = teacher_probs.raw() + r * c;
    double qsum = 0;
    for (std::size_t j = 0; j < c; ++j) qsum += q[j];
    if (std::abs(qsum - 1.0) > tol) {
      throw ShapeError("teacher row " + std::to_string(r) + " sums to " + std::to_string(qsum) + ", not 1");
    }
    const Real* z = student_logits.raw() + r * c;
    const double lse = detail::log_sum_exp(z, c);
    for (std::size_t j = 0; j < c; ++j) {
      const double logp = static_cast<double>(z[j]) - lse;
      out.loss -= static_cast<double>(q[j]) * logp * inv_n;
      out.grad_logits[r * c + j] = static_cast<Real>((std::exp(logp) - static_cast<double>(q[j])) * inv_n);
    }
  }
  return out;
}

/// p' = p - lr * g over identical key sets.
template <typename Real>
BasicParamSet<Real> sgd_step(const BasicParamSet<Real>& params, const BasicParamSet<Real>& grads, Real lr) {
  if (lr < Real(0)) throw ShapeError("learning rate must be non-negative");
  if (params.size() != grads.size()) throw ShapeError("parameter and gradient key sets differ");
  BasicParamSet<Real> out = params;
  for (auto& [name, p] : out) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ShapeError("no gradient for parameter '" + name + "'");
    if (it->second.dims() != p.dims()) throw ShapeError("gradient shape mismatch for '" + name + "'");
    if (lr == Real(0)) continue;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * it->second[i];
  }
  return out;
}

/// In-place SGD on a parameter store; only the layers present in `grads` move.
template <typename Real>
void sgd_update(BasicParamStore<Real>& store, const BasicParamStore<Real>& grads, Real lr) {
  if (lr < Real(0)) throw ShapeError("learning rate must be non-negative");
  for (const auto& [layer, g] : grads) {
    auto it = store.find(layer);
    if (it == store.end()) throw ShapeError("gradient for unknown layer '" + layer + "'");
    if (it->second.size() != g.size()) throw ShapeError("parameter key sets differ for layer '" + layer + "'");
    for (const auto& [name, gt] : g) {
      auto pt = it->second.find(name);
      if (pt == it->second.end() || pt->second.dims() != gt.dims()) {
        throw ShapeError("gradient shape mismatch for '" + layer + "." + name + "'");
      }
    }
  }
  if (lr == Real(0)) return;
  for (const auto& [layer, g] : grads) {
    auto& p = store.at(layer);
    for (const auto& [name, gt] : g) {
      auto& pt = p.at(name);
      for (std::size_t i = 0; i < pt.size(); ++i) pt[i] -= lr * gt[i];
    }
  }
}

template <typename Real>
double flat_dot(const BasicParamSet<Real>& a, const BasicParamSet<Real>& b) {
  if (a.size() != b.size()) throw ShapeError("flat_dot: key sets differ");
  double acc = 0;
  for (const auto& [name, ta] : a) {
    auto it = b.find(name);
    if (it == b.end()) throw ShapeError("flat_dot: key '" + name + "' missing");
    if (it->second.dims() != ta.dims()) throw ShapeError("flat_dot: shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < ta.size(); ++i) acc += static_cast<double>(ta[i]) * static_cast<double>(it->second[i]);
  }
  return acc;
}

template <typename Real>
double flat_dot(const BasicParamStore<Real>& a, const BasicParamStore<Real>& b) {
  if (a.size() != b.size()) throw ShapeError("flat_dot: layer sets differ");
  double acc = 0;
  for (const auto& [layer, pa] : a) {
    auto it = b.find(layer);
    if (it == b.end()) throw ShapeError("flat_dot: layer '" + layer + "' missing");
    acc += flat_dot(pa, it->second);
  }
  return acc;
}

template <typename Real>
void scale_in_place(BasicParamStore<Real>& s, Real factor) {
  for (auto& [layer, p] : s) {
    for (auto& [name, t] : p) {
      for (auto& v : t.data()) v *= factor;
    }
  }
}

template <typename Real>
void add_in_place(BasicParamSet<Real>& acc, const BasicParamSet<Real>& g) {
  for (const auto& [name, t] : g) {
    auto it = acc.find(name);
    if (it == acc.end()) {
      acc.emplace(name, t);
      continue;
    }
    if (it->second.dims() != t.dims()) throw ShapeError("gradient shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < t.size(); ++i) it->second[i] += t[i];
  }
}

/// Sigmoid in double without overflow for large |x|.
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace cream

#endif  // CREAM_NUMERICS_HPP
