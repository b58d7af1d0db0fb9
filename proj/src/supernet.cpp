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

#include "cream/supernet.hpp"

#include <cmath>
#include <set>

namespace cream {

namespace {

template <typename Real>
const BasicParamSet<Real>& no_params() {
  static const BasicParamSet<Real> empty;
  return empty;
}

template <typename Real>
BasicParamSet<Real> init_layer(const LayerSpec& layer, Rng& rng, double init_scale) {
  BasicTensor<Real> w(layer.weight_dims());
  if (init_scale != 0.0) {
    const double bound = init_scale * std::sqrt(3.0 / static_cast<double>(layer.fan_in()));
    for (auto& v : w.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
  }
  BasicParamSet<Real> p;
  p.emplace("weight", std::move(w));
  p.emplace("bias", BasicTensor<Real>(layer.bias_dims()));
  return p;
}

// Visits every parameterized layer in a fixed order: stem, blocks (all operators), head.
template <typename F>
void for_each_param_layer(const SpaceSpec& space, F&& f) {
  for (std::size_t i = 0; i < space.stem.size(); ++i) {
    if (space.stem[i].has_params()) f(BasicSupernet<float>::stem_key(i), space.stem[i], -1, -1);
  }
  for (std::size_t b = 0; b < space.blocks.size(); ++b) {
    const auto& blk = space.blocks[b];
    for (std::size_t o = 0; o < blk.layouts.size(); ++o) {
      const auto& layers = blk.layouts[o].layers;
      for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].has_params()) {
          f(BasicSupernet<float>::block_key(b, o, i), layers[i], static_cast<int>(b), static_cast<int>(o));
        }
      }
    }
  }
  for (std::size_t i = 0; i < space.head.size(); ++i) {
    if (space.head[i].has_params()) f(BasicSupernet<float>::head_key(i), space.head[i], -1, -1);
  }
}

template <typename Real>
BasicTensor<Real> run_segment(const std::vector<LayerSpec>& layers, const std::vector<std::string>& keys,
                              const BasicParamStore<Real>& weights, bool residual, const BasicTensor<Real>& x,
                              std::vector<ActivationCache<Real>>* caches) {
  BasicTensor<Real> h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& params = keys[i].empty() ? no_params<Real>() : weights.at(keys[i]);
    if (caches) {
      auto out = forward(layers[i], params, h);
      caches->push_back(std::move(out.cache));
      h = std::move(out.y);
    } else {
      h = infer(layers[i], params, h);
    }
  }
  if (residual) h = forward(LayerSpec::add(), no_params<Real>(), h, x).y;
  return h;
}

}  // namespace

template <typename Real>
std::string BasicSupernet<Real>::stem_key(std::size_t layer) {
  return "stem." + std::to_string(layer);
}

template <typename Real>
std::string BasicSupernet<Real>::block_key(std::size_t block, std::size_t op, std::size_t layer) {
  return "b" + std::to_string(block) + ".o" + std::to_string(op) + "." + std::to_string(layer);
}

template <typename Real>
std::string BasicSupernet<Real>::head_key(std::size_t layer) {
  return "head." + std::to_string(layer);
}

template <typename Real>
BasicSupernet<Real>::BasicSupernet(std::shared_ptr<const SpaceSpec> space, BasicParamStore<Real> weights)
    : space_(std::move(space)), weights_(std::move(weights)) {
  if (!space_) throw ShapeError("supernet needs a space");
}

template <typename Real>
BasicSupernet<Real> BasicSupernet<Real>::init(std::shared_ptr<const SpaceSpec> space, Rng& rng, double init_scale) {
  BasicParamStore<Real> weights;
  for_each_param_layer(*space, [&](const std::string& key, const LayerSpec& layer, int, int) {
    weights.emplace(key, init_layer<Real>(layer, rng, init_scale));
  });
  return BasicSupernet(std::move(space), std::move(weights));
}

template <typename Real>
BasicSupernet<Real> BasicSupernet<Real>::init_path(std::shared_ptr<const SpaceSpec> space, const PathSpec& path,
                                                   Rng& rng, double init_scale) {
  validate_path(*space, path);
  BasicParamStore<Real> weights;
  for_each_param_layer(*space, [&](const std::string& key, const LayerSpec& layer, int block, int op) {
    if (block >= 0 && path.choices[static_cast<std::size_t>(block)] != op) return;
    weights.emplace(key, init_layer<Real>(layer, rng, init_scale));
  });
  return BasicSupernet(std::move(space), std::move(weights));
}

template <typename Real>
std::vector<typename BasicSupernet<Real>::Segment> BasicSupernet<Real>::segments(const PathSpec& path) const {
  validate_path(*space_, path);
  std::vector<Segment> out;
  out.reserve(space_->blocks.size() + 2);
  auto keys_for = [](const std::vector<LayerSpec>& layers, auto&& key_of) {
    std::vector<std::string> keys(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].has_params()) keys[i] = key_of(i);
    }
    return keys;
  };
  out.push_back({&space_->stem, keys_for(space_->stem, [](std::size_t i) { return stem_key(i); }), false});
  for (std::size_t b = 0; b < space_->blocks.size(); ++b) {
    const auto op = static_cast<std::size_t>(path.choices[b]);
    const auto& layout = space_->blocks[b].layouts[op];
    out.push_back({&layout.layers, keys_for(layout.layers, [&](std::size_t i) { return block_key(b, op, i); }),
                   layout.residual});
  }
  out.push_back({&space_->head, keys_for(space_->head, [](std::size_t i) { return head_key(i); }), false});
  return out;
}

template <typename Real>
std::vector<std::string> BasicSupernet<Real>::path_keys(const PathSpec& path) const {
  std::vector<std::string> keys;
  for (const auto& seg : segments(path)) {
    for (const auto& k : seg.keys) {
      if (!k.empty()) keys.push_back(k);
    }
  }
  return keys;
}

template <typename Real>
void BasicSupernet<Real>::check_batch(const BasicTensor<Real>& batch) const {
  const auto& c = space_->config;
  const auto& d = batch.dims();
  if (d.size() != 4 || d[1] != c.input_channels || d[2] != c.resolution || d[3] != c.resolution) {
    throw ShapeError("batch dims " + dims_string(d) + " do not match the space input [N," +
                     std::to_string(c.input_channels) + "," + std::to_string(c.resolution) + "," +
                     std::to_string(c.resolution) + "]");
  }
}

template <typename Real>
PathForward<Real> BasicSupernet<Real>::forward_path(const PathSpec& path, const BasicTensor<Real>& batch) const {
  check_batch(batch);
  PathForward<Real> out;
  out.cache.path = path;
  BasicTensor<Real> h = batch;
  for (const auto& seg : segments(path)) {
    typename PathCache<Real>::Segment sc;
    sc.residual = seg.residual;
    h = run_segment(*seg.layers, seg.keys, weights_, seg.residual, h, &sc.layers);
    out.cache.segments.push_back(std::move(sc));
  }
  out.logits = std::move(h);
  return out;
}

template <typename Real>
BasicTensor<Real> BasicSupernet<Real>::logits(const PathSpec& path, const BasicTensor<Real>& batch) const {
  check_batch(batch);
  BasicTensor<Real> h = batch;
  for (const auto& seg : segments(path)) h = run_segment<Real>(*seg.layers, seg.keys, weights_, seg.residual, h, nullptr);
  return h;
}

template <typename Real>
BasicPathGrads<Real> BasicSupernet<Real>::backward_path(const PathSpec& path, const PathCache<Real>& cache,
                                                        const BasicTensor<Real>& grad_logits) const {
  if (cache.path != path) throw ShapeError("cache was recorded for path " + encode(cache.path));
  const auto segs = segments(path);
  if (cache.segments.size() != segs.size()) throw ShapeError("cache does not match the path layout");
  BasicPathGrads<Real> grads;
  BasicTensor<Real> g = grad_logits;
  for (std::size_t s = segs.size(); s-- > 0;) {
    const auto& seg = segs[s];
    const auto& sc = cache.segments[s];
    if (sc.layers.size() != seg.layers->size()) throw ShapeError("cache does not match the path layout");
    BasicTensor<Real> g_out = g;
    for (std::size_t i = seg.layers->size(); i-- > 0;) {
      const auto& key = seg.keys[i];
      const auto& params = key.empty() ? no_params<Real>() : weights_.at(key);
      auto lg = backward((*seg.layers)[i], params, sc.layers[i], g);
      if (!key.empty()) grads[key] = std::move(lg.grad_params);
      g = std::move(lg.grad_x);
    }
    if (seg.residual) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += g_out[i];
    }
  }
  return grads;
}

template <typename Real>
void BasicSupernet<Real>::apply_path_grads(const PathSpec& path, const BasicPathGrads<Real>& grads, Real lr) {
  const auto keys = path_keys(path);
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : grads) {
    if (!allowed.contains(key)) throw ShapeError("gradient for layer '" + key + "' which is not on the path");
  }
  sgd_update(weights_, grads, lr);
}

template <typename Real>
BasicTensor<Real> BasicSupernet<Real>::soft_targets(const PathSpec& teacher_path,
                                                    const BasicTensor<Real>& batch) const {
  return softmax(logits(teacher_path, batch));
}

template class BasicSupernet<float>;
template class BasicSupernet<double>;

}  // namespace cream
