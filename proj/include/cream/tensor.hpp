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

#ifndef CREAM_TENSOR_HPP
#define CREAM_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cream/error.hpp"

namespace cream {

using Dims = std::vector<std::size_t>;

inline std::size_t dims_product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string dims_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    os << (i ? "," : "") << dims[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major tensor. Images are NCHW, feature matrices are [N, F].
template <typename Real>
class BasicTensor {
 public:
  using value_type = Real;

  BasicTensor() = default;

  explicit BasicTensor(Dims dims, Real fill = Real(0))
      : dims_(std::move(dims)), data_(dims_product(dims_), fill) {
    check_dims();
  }

  BasicTensor(Dims dims, std::vector<Real> data) : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != dims_product(dims_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims " + dims_string(dims_));
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  Real* raw() noexcept { return data_.data(); }
  const Real* raw() const noexcept { return data_.data(); }

  Real& operator[](std::size_t i) noexcept { return data_[i]; }
  const Real& operator[](std::size_t i) const noexcept { return data_[i]; }

  bool all_finite() const noexcept {
    for (Real v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  void check_dims() const {
    for (std::size_t d : dims_) {
      if (d == 0) throw ShapeError("tensor dims must be positive, got " + dims_string(dims_));
    }
  }

  Dims dims_;
  std::vector<Real> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
  std::vector<To> out(t.data().begin(), t.data().end());
  return BasicTensor<To>(t.dims(), std::move(out));
}

/// Named parameters of one layer ("weight", "bias").
template <typename Real>
using BasicParamSet = std::map<std::string, BasicTensor<Real>>;

using ParamSet = BasicParamSet<float>;
using ParamSet64 = BasicParamSet<double>;

/// Parameters of many layers keyed by layer id, e.g. "b2.o1.0" -> {"weight", "bias"}.
template <typename Real>
using BasicParamStore = std::map<std::string, BasicParamSet<Real>>;
using ParamStore = BasicParamStore<float>;

template <typename To, typename From>
BasicParamSet<To> params_cast(const BasicParamSet<From>& p) {
  BasicParamSet<To> out;
  for (const auto& [name, t] : p) out.emplace(name, tensor_cast<To>(t));
  return out;
}

template <typename To, typename From>
BasicParamStore<To> store_cast(const BasicParamStore<From>& s) {
  BasicParamStore<To> out;
  for (const auto& [name, p] : s) out.emplace(name, params_cast<To>(p));
  return out;
}

}  // namespace cream

#endif  // CREAM_TENSOR_HPP
