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

#ifndef CREAM_SUPERNET_HPP
#define CREAM_SUPERNET_HPP

#include <memory>
#include <string>
#include <vector>

#include "cream/numerics.hpp"
#include "cream/rng.hpp"
#include "cream/search_space.hpp"

namespace cream {

/// Gradients for the parameterized layers of one path, keyed like the weight store.
template <typename Real>
using BasicPathGrads = BasicParamStore<Real>;

/// Activations recorded by `forward_path`, one segment per stem/block/head.
template <typename Real>
struct PathCache {
  struct Segment {
    std::vector<ActivationCache<Real>> layers;
    bool residual = false;
  };
  PathSpec path;
  std::vector<Segment> segments;  // stem, blocks..., head
};

template <typename Real>
struct PathForward {
  BasicTensor<Real> logits;
  PathCache<Real> cache;
};

/// Weight-sharing hypernetwork: one ParamSet per parameterized layer of every
/// (block, operator) pair, plus the stem and head. A path reads and writes only
/// the layers of the operators it selects.
template <typename Real>
class BasicSupernet {
 public:
  /// Draws every weight from U(-b, b), b = init_scale * sqrt(3 / fan_in); biases are zero.
  static BasicSupernet init(std::shared_ptr<const SpaceSpec> space, Rng& rng, double init_scale);
  /// Same as `init` but only materializes the layers that `path` uses.
  static BasicSupernet init_path(std::shared_ptr<const SpaceSpec> space, const PathSpec& path, Rng& rng,
                                 double init_scale);
  BasicSupernet(std::shared_ptr<const SpaceSpec> space, BasicParamStore<Real> weights);

  const SpaceSpec& space() const noexcept { return *space_; }
  std::shared_ptr<const SpaceSpec> space_ptr() const noexcept { return space_; }
  const BasicParamStore<Real>& weights() const noexcept { return weights_; }
  BasicParamStore<Real>& weights() noexcept { return weights_; }

  static std::string stem_key(std::size_t layer);
  static std::string block_key(std::size_t block, std::size_t op, std::size_t layer);
  static std::string head_key(std::size_t layer);
  /// Every weight-store key the path reads, in execution order.
  std::vector<std::string> path_keys(const PathSpec& path) const;

  PathForward<Real> forward_path(const PathSpec& path, const BasicTensor<Real>& batch) const;
  /// Forward without caches.
  BasicTensor<Real> logits(const PathSpec& path, const BasicTensor<Real>& batch) const;
  BasicPathGrads<Real> backward_path(const PathSpec& path, const PathCache<Real>& cache,
                                     const BasicTensor<Real>& grad_logits) const;
  /// SGD on the path's layers only; every other layer stays bitwise unchanged.
  void apply_path_grads(const PathSpec& path, const BasicPathGrads<Real>& grads, Real lr);
  /// softmax(logits(teacher_path, batch)); constant with respect to later updates.
  BasicTensor<Real> soft_targets(const PathSpec& teacher_path, const BasicTensor<Real>& batch) const;

  template <typename To>
  BasicSupernet<To> cast() const {
    return BasicSupernet<To>(space_, store_cast<To>(weights_));
  }

 private:
  struct Segment {
    const std::vector<LayerSpec>* layers;
    std::vector<std::string> keys;  // empty string for parameterless layers
    bool residual;
  };
  std::vector<Segment> segments(const PathSpec& path) const;
  void check_batch(const BasicTensor<Real>& batch) const;

  std::shared_ptr<const SpaceSpec> space_;
  BasicParamStore<Real> weights_;
};

using Supernet = BasicSupernet<float>;
using Supernet64 = BasicSupernet<double>;
using PathGrads = BasicPathGrads<float>;

extern template class BasicSupernet<float>;
extern template class BasicSupernet<double>;

}  // namespace cream

#endif  // CREAM_SUPERNET_HPP
