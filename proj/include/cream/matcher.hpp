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

// Teacher matching network.
//
// The score of a (teacher, student) pair is
//
//   rho = sigmoid( mean_n  w2 . relu(W1 (t_n - s_n) + b1) + b2 )
//
// where t_n, s_n are the teacher and student logits of example n. The
// teacher with the largest score distills into the student with weight rho,
// so the student's post-update validation loss R depends on theta only
// through rho:
//
//   w' = w - eta (g_ce + rho g_kd)   =>   dR/dtheta = -eta <grad R(w'), g_kd> * drho/dtheta
//
// The argmax over the board is piecewise constant in theta and contributes no
// gradient.

#ifndef CREAM_MATCHER_HPP
#define CREAM_MATCHER_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cream/board.hpp"
#include "cream/numerics.hpp"
#include "cream/supernet.hpp"

namespace cream {

/// Raised when every board entry equals the student path.
class NoTeacherError : public Error {
 public:
  using Error::Error;
};

template <typename Real>
struct BasicMetaNet {
  std::size_t classes = 0;
  std::size_t hidden = 0;
  BasicParamStore<Real> params;  // "layer1": dense C->H, "layer2": dense H->1

  static BasicMetaNet init(std::size_t classes, std::size_t hidden, Rng& rng, double init_scale);

  LayerSpec layer1() const { return LayerSpec::dense(classes, hidden); }
  LayerSpec layer2() const { return LayerSpec::dense(hidden, 1); }

  template <typename To>
  BasicMetaNet<To> cast() const {
    return {classes, hidden, store_cast<To>(params)};
  }

  friend bool operator==(const BasicMetaNet&, const BasicMetaNet&) = default;
};

template <typename Real>
using BasicMetaGrads = BasicParamStore<Real>;

template <typename Real>
struct MatchScore {
  double rho = 0.5;
  double pre_activation = 0.0;
  std::optional<std::size_t> teacher_index;
  // forward state for d rho / d theta
  ActivationCache<Real> layer1_cache;
  ActivationCache<Real> relu_cache;
  ActivationCache<Real> layer2_cache;
  std::size_t rows = 0;
};

template <typename Real>
struct TeacherChoice {
  MatchScore<Real> score;
  BasicTensor<Real> teacher_logits;
  /// Pre-activation per board slot; empty for the excluded student slot.
  std::vector<std::optional<double>> pre_activations;
};

using MetaNet = BasicMetaNet<float>;
using MetaGrads = BasicMetaGrads<float>;

template <typename Real>
MatchScore<Real> score(const BasicMetaNet<Real>& meta, const BasicTensor<Real>& teacher_logits,
                       const BasicTensor<Real>& student_logits);

/// Index of the first maximum.
std::size_t argmax_first(std::span<const double> values);

/// Scores every board entry against the student on the same batch and picks the
/// argmax (lowest slot on ties). A board slot holding the student path is skipped.
template <typename Real>
TeacherChoice<Real> select_teacher(const BasicMetaNet<Real>& meta, const Board& board,
                                   const BasicSupernet<Real>& net, const PathSpec& student_path,
                                   const BasicTensor<Real>& batch, const BasicTensor<Real>& student_logits);

template <typename Real>
TeacherChoice<Real> select_teacher(const BasicMetaNet<Real>& meta, const Board& board,
                                   const BasicSupernet<Real>& net, const PathSpec& student_path,
                                   const BasicTensor<Real>& batch) {
  return select_teacher(meta, board, net, student_path, batch, net.logits(student_path, batch));
}

/// d rho / d theta for a recorded score.
template <typename Real>
BasicMetaGrads<Real> rho_gradient(const BasicMetaNet<Real>& meta, const MatchScore<Real>& cached);

/// dR/dtheta = -eta <v, g_kd> * d rho / d theta, where v = grad of the
/// validation loss at the updated weights and g_kd the distillation gradient at
/// the old weights, both restricted to the student path.
template <typename Real>
BasicMetaGrads<Real> hypergradient(const BasicMetaNet<Real>& meta, const MatchScore<Real>& cached,
                                   const BasicPathGrads<Real>& v, const BasicPathGrads<Real>& g_kd, double eta);

template <typename Real>
BasicMetaNet<Real> meta_step(const BasicMetaNet<Real>& meta, const BasicMetaGrads<Real>& grads, Real meta_lr);

}  // namespace cream

#endif  // CREAM_MATCHER_HPP
