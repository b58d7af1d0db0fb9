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

#include "cream/matcher.hpp"

#include <cmath>

namespace cream {

template <typename Real>
BasicMetaNet<Real> BasicMetaNet<Real>::init(std::size_t classes, std::size_t hidden, Rng& rng, double init_scale) {
  if (classes == 0) throw ConfigError("class count must be positive", "meta.classes");
  if (hidden == 0) throw ConfigError("hidden size must be at least 1", "meta.hidden");
  BasicMetaNet net{classes, hidden, {}};
  auto make = [&](const LayerSpec& l) {
    BasicTensor<Real> w(l.weight_dims());
    const double bound = init_scale * std::sqrt(3.0 / static_cast<double>(l.fan_in()));
    if (init_scale != 0.0) {
      for (auto& v : w.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
    }
    BasicParamSet<Real> p;
    p.emplace("weight", std::move(w));
    p.emplace("bias", BasicTensor<Real>(l.bias_dims()));
    return p;
  };
  net.params.emplace("layer1", make(net.layer1()));
  net.params.emplace("layer2", make(net.layer2()));
  return net;
}

template <typename Real>
MatchScore<Real> score(const BasicMetaNet<Real>& meta, const BasicTensor<Real>& teacher_logits,
                       const BasicTensor<Real>& student_logits) {
  if (teacher_logits.dims() != student_logits.dims() || teacher_logits.rank() != 2) {
    throw ShapeError("teacher and student logits must share a [N, C] shape");
  }
  if (teacher_logits.dim(1) != meta.classes) {
    throw ShapeError("meta network expects " + std::to_string(meta.classes) + " classes");
  }
  BasicTensor<Real> diff = teacher_logits;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= student_logits[i];

  MatchScore<Real> s;
  s.rows = diff.dim(0);
  auto h1 = forward(meta.layer1(), meta.params.at("layer1"), diff);
  auto h2 = forward(LayerSpec::relu(), BasicParamSet<Real>{}, h1.y);
  auto out = forward(meta.layer2(), meta.params.at("layer2"), h2.y);
  double acc = 0;
  for (std::size_t n = 0; n < s.rows; ++n) acc += static_cast<double>(out.y[n]);
  s.pre_activation = acc / static_cast<double>(s.rows);
  s.rho = sigmoid(s.pre_activation);
  s.layer1_cache = std::move(h1.cache);
  s.relu_cache = std::move(h2.cache);
  s.layer2_cache = std::move(out.cache);
  return s;
}

std::size_t argmax_first(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template <typename Real>
TeacherChoice<Real> select_teacher(const BasicMetaNet<Real>& meta, const Board& board,
                                   const BasicSupernet<Real>& net, const PathSpec& student_path,
                                   const BasicTensor<Real>& batch, const BasicTensor<Real>& student_logits) {
  TeacherChoice<Real> choice;
  choice.pre_activations.resize(board.size());
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < board.size(); ++k) {
    const auto& teacher = board.entries()[k].path;
    if (teacher == student_path) continue;
    auto t_logits = net.logits(teacher, batch);
    auto s = score(meta, t_logits, student_logits);
    choice.pre_activations[k] = s.pre_activation;
    // sigmoid is monotone: comparing pre-activations avoids ties from saturation
    if (!best || s.pre_activation > choice.score.pre_activation) {
      best = k;
      choice.score = std::move(s);
      choice.teacher_logits = std::move(t_logits);
    }
  }
  if (!best) throw NoTeacherError("every board entry equals the student path " + encode(student_path));
  choice.score.teacher_index = best;
  return choice;
}

template <typename Real>
BasicMetaGrads<Real> rho_gradient(const BasicMetaNet<Real>& meta, const MatchScore<Real>& cached) {
  if (!cached.layer2_cache.filled || cached.rows == 0) throw ShapeError("match score has no cached forward state");
  const double dsig = cached.rho * (1.0 - cached.rho);
  BasicTensor<Real> g_out({cached.rows, 1}, static_cast<Real>(dsig / static_cast<double>(cached.rows)));
  auto g2 = backward(meta.layer2(), meta.params.at("layer2"), cached.layer2_cache, g_out);
  auto gr = backward(LayerSpec::relu(), BasicParamSet<Real>{}, cached.relu_cache, g2.grad_x);
  auto g1 = backward(meta.layer1(), meta.params.at("layer1"), cached.layer1_cache, gr.grad_x);
  BasicMetaGrads<Real> grads;
  grads.emplace("layer1", std::move(g1.grad_params));
  grads.emplace("layer2", std::move(g2.grad_params));
  return grads;
}

template <typename Real>
BasicMetaGrads<Real> hypergradient(const BasicMetaNet<Real>& meta, const MatchScore<Real>& cached,
                                   const BasicPathGrads<Real>& v, const BasicPathGrads<Real>& g_kd, double eta) {
  const double s = -eta * flat_dot(v, g_kd);
  auto grads = rho_gradient(meta, cached);
  scale_in_place(grads, static_cast<Real>(s));
  return grads;
}

template <typename Real>
BasicMetaNet<Real> meta_step(const BasicMetaNet<Real>& meta, const BasicMetaGrads<Real>& grads, Real meta_lr) {
  if (grads.size() != meta.params.size()) throw ShapeError("meta gradient layers do not match the meta network");
  BasicMetaNet<Real> out = meta;
  for (auto& [layer, p] : out.params) {
    auto it = grads.find(layer);
    if (it == grads.end()) throw ShapeError("no meta gradient for '" + layer + "'");
    p = sgd_step(p, it->second, meta_lr);
  }
  return out;
}

#define CREAM_INSTANTIATE_MATCHER(Real)                                                                          \
  template struct BasicMetaNet<Real>;                                                                            \
  template MatchScore<Real> score(const BasicMetaNet<Real>&, const BasicTensor<Real>&, const BasicTensor<Real>&); \
  template TeacherChoice<Real> select_teacher(const BasicMetaNet<Real>&, const Board&, const BasicSupernet<Real>&, \
                                              const PathSpec&, const BasicTensor<Real>&, const BasicTensor<Real>&); \
  template BasicMetaGrads<Real> rho_gradient(const BasicMetaNet<Real>&, const MatchScore<Real>&);               \
  template BasicMetaGrads<Real> hypergradient(const BasicMetaNet<Real>&, const MatchScore<Real>&,               \
                                              const BasicPathGrads<Real>&, const BasicPathGrads<Real>&, double); \
  template BasicMetaNet<Real> meta_step(const BasicMetaNet<Real>&, const BasicMetaGrads<Real>&, Real);

CREAM_INSTANTIATE_MATCHER(float)
CREAM_INSTANTIATE_MATCHER(double)

#undef CREAM_INSTANTIATE_MATCHER

}  // namespace cream
