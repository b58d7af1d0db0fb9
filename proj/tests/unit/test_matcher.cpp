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


#include <doctest.h>

#include "cream/matcher.hpp"
#include "oracles.hpp"

using namespace cream;

namespace {

std::shared_ptr<const SpaceSpec> tiny() {
  SpaceConfig c;
  c.resolution = 8;
  c.classes = 3;
  c.stem_channels = 4;
  c.stem_stride = 2;
  c.head_channels = 6;
  const std::vector<OperatorSpec> ops{OperatorSpec::mbconv(3, 2), OperatorSpec::skip(), OperatorSpec::conv(3)};
  c.stages = {{4, 1, 1, ops}, {4, 1, 1, ops}};
  return std::make_shared<const SpaceSpec>(build_space(c));
}

template <typename Real>
BasicTensor<Real> random_tensor(Dims dims, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  BasicTensor<Real> t(std::move(dims));
  for (auto& v : t.data()) v = static_cast<Real>(rng.uniform(-scale, scale));
  return t;
}

MetaNet scalar_meta(float w1, float b1, float w2, float b2) {
  MetaNet m{1, 1, {}};
  m.params["layer1"].emplace("weight", Tensor({1, 1}, w1));
  m.params["layer1"].emplace("bias", Tensor({1}, b1));
  m.params["layer2"].emplace("weight", Tensor({1, 1}, w2));
  m.params["layer2"].emplace("bias", Tensor({1}, b2));
  return m;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Board board_of(const SpaceSpec& space, std::vector<PathSpec> paths) {
  std::vector<BoardEntry> e;
  for (auto& p : paths) e.push_back({p, 0.0, count_flops(space, p)});
  return Board(std::move(e), 0, UINT64_MAX);
}

}  // namespace

TEST_CASE("identical logits with zero biases give rho one half") {
  Rng rng(1);
  auto meta = MetaNet::init(4, 8, rng, 1.0);
  const auto z = random_tensor<float>({5, 4}, 2);
  const auto s = score(meta, z, z);
  CHECK(s.pre_activation == 0.0);
  CHECK(s.rho == 0.5);
}

TEST_CASE("negating the output layer maps rho to one minus rho") {
  Rng rng(3);
  auto meta = MetaNet::init(4, 8, rng, 1.0);
  const auto t = random_tensor<float>({6, 4}, 4, 3.0), st = random_tensor<float>({6, 4}, 5, 3.0);
  const double rho = score(meta, t, st).rho;
  for (auto& v : meta.params.at("layer2").at("weight").data()) v = -v;
  CHECK(score(meta, t, st).rho == doctest::Approx(1.0 - rho).epsilon(1e-6));
}

TEST_CASE("scalar meta network matches the closed form") {
  const auto meta = scalar_meta(2.0f, 0.5f, -1.5f, 0.25f);
  // single example
  const double d = 0.8;
  auto one = score(meta, Tensor({1, 1}, 1.0f), Tensor({1, 1}, 0.2f));
  CHECK(one.rho == doctest::Approx(logistic(-1.5 * std::max(0.0, 2.0 * d + 0.5) + 0.25)).epsilon(1e-6));
  // batch of two: outputs are averaged before the squashing
  Tensor t({2, 1}), s({2, 1});
  t[0] = 1.0f, t[1] = -0.5f, s[0] = 0.2f, s[1] = 0.3f;
  const double o1 = -1.5 * std::max(0.0, 2.0 * 0.8 + 0.5) + 0.25;
  const double o2 = -1.5 * std::max(0.0, 2.0 * -0.8 + 0.5) + 0.25;
  auto two = score(meta, t, s);
  CHECK(two.pre_activation == doctest::Approx((o1 + o2) / 2).epsilon(1e-6));
  CHECK(two.rho > 0.0);
  CHECK(two.rho < 1.0);
}

TEST_CASE("score rejects mismatched logits") {
  Rng rng(1);
  auto meta = MetaNet::init(4, 2, rng, 1.0);
  CHECK_THROWS_AS(score(meta, Tensor({2, 4}), Tensor({3, 4})), ShapeError);
  CHECK_THROWS_AS(score(meta, Tensor({2, 3}), Tensor({2, 3})), ShapeError);
  CHECK_THROWS_AS(MetaNet::init(4, 0, rng, 1.0), ConfigError);
}

TEST_CASE("rho stays strictly inside the unit interval") {
  Rng rng(9);
  auto meta = MetaNet::init(4, 16, rng, 1.0);
  for (int i = 0; i < 50; ++i) {
    const auto s = score(meta, random_tensor<float>({4, 4}, 100 + i, 2.0), random_tensor<float>({4, 4}, 200 + i, 2.0));
    CHECK(s.rho > 0.0);
    CHECK(s.rho < 1.0);
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  const std::vector<double> v{0.3, 0.9, 0.9};
  CHECK(argmax_first(v) == 1);
  CHECK_THROWS(argmax_first(std::vector<double>{}));
}

TEST_CASE("teacher selection") {
  auto space = tiny();
  Rng rng(11);
  auto net = Supernet::init(space, rng, 1.0);
  const auto x = random_tensor<float>({4, 1, 8, 8}, 12);
  const PathSpec student{{0, 0}};

  SUBCASE("singleton board returns its entry") {
    auto meta = MetaNet::init(3, 4, rng, 1.0);
    const auto c = select_teacher(meta, board_of(*space, {PathSpec{{2, 1}}}), net, student, x);
    CHECK(*c.score.teacher_index == 0);
    CHECK(c.teacher_logits == net.logits(PathSpec{{2, 1}}, x));
  }
  SUBCASE("the student's own slot is skipped and ties pick the lowest index") {
    Rng r0(1);
    auto flat = MetaNet::init(3, 4, r0, 0.0);  // every score is exactly 0.5
    const auto c = select_teacher(flat, board_of(*space, {student, PathSpec{{1, 2}}, PathSpec{{2, 2}}}), net, student, x);
    CHECK(*c.score.teacher_index == 1);
    CHECK_FALSE(c.pre_activations[0].has_value());
  }
  SUBCASE("choice is the argmax of the per-entry scores") {
    auto meta = MetaNet::init(3, 8, rng, 2.0);
    const std::vector<PathSpec> paths{PathSpec{{1, 1}}, PathSpec{{2, 0}}, PathSpec{{0, 2}}, PathSpec{{2, 2}}};
    const auto c = select_teacher(meta, board_of(*space, paths), net, student, x);
    const auto zs = net.logits(student, x);
    std::vector<double> pre;
    for (const auto& p : paths) pre.push_back(score(meta, net.logits(p, x), zs).pre_activation);
    CHECK(*c.score.teacher_index == argmax_first(pre));

    // positive rescaling and shifting of the output layer is strictly increasing
    auto scaled = meta;
    for (auto& v : scaled.params.at("layer2").at("weight").data()) v *= 3.0f;
    for (auto& v : scaled.params.at("layer2").at("bias").data()) v = v * 3.0f + 5.0f;
    CHECK(*select_teacher(scaled, board_of(*space, paths), net, student, x).score.teacher_index ==
          *c.score.teacher_index);
  }
  SUBCASE("no teacher when the board holds only the student") {
    auto meta = MetaNet::init(3, 4, rng, 1.0);
    CHECK_THROWS_AS(select_teacher(meta, board_of(*space, {student}), net, student, x), NoTeacherError);
  }
}

TEST_CASE("hypergradient closed form") {
  Rng rng(5);
  auto meta = MetaNet::init(3, 4, rng, 1.0);
  const auto cached = score(meta, random_tensor<float>({2, 3}, 1), random_tensor<float>({2, 3}, 2));
  PathGrads v, g;
  v["a"].emplace("weight", Tensor({2}));
  g["a"].emplace("weight", Tensor({2}));
  v["a"].at("weight")[0] = 1.0f;
  g["a"].at("weight")[1] = 1.0f;
  for (const auto& [layer, p] : hypergradient(meta, cached, v, g, 0.1)) {
    for (const auto& [name, t] : p) {
      for (float x : t.data()) CHECK(x == 0.0f);
    }
  }
  g["a"].at("weight")[0] = 1.0f;  // now <v, g> = 1
  const auto h = hypergradient(meta, cached, v, g, 0.1);
  const auto r = rho_gradient(meta, cached);
  for (const auto& [layer, p] : r) {
    for (const auto& [name, t] : p) {
      const auto& ht = h.at(layer).at(name);
      for (std::size_t i = 0; i < t.size(); ++i) CHECK(ht[i] == doctest::Approx(-0.1 * t[i]).epsilon(1e-6));
    }
  }
  CHECK_THROWS(rho_gradient(meta, MatchScore<float>{}));
}

namespace {

/// Two-step pipeline with the teacher frozen: distill on a train batch, then
/// score the updated weights on a validation batch.
struct Pipeline {
  std::shared_ptr<const SpaceSpec> space = tiny();
  Supernet64 net;
  PathSpec student{{0, 2}};
  PathSpec teacher{{2, 0}};
  Tensor64 x, xv;
  std::vector<int> y{0, 1, 2, 1}, yv{2, 0, 1};
  double eta = 0.3;

  Pipeline() : net(make_net()), x(random_tensor<double>({4, 1, 8, 8}, 31)), xv(random_tensor<double>({3, 1, 8, 8}, 32)) {}

  Supernet64 make_net() {
    Rng rng(30);
    return Supernet64::init(space, rng, 1.0);
  }

  struct Out {
    double r;
    MatchScore<double> cached;
    BasicPathGrads<double> g_kd;
    BasicPathGrads<double> v;
  };

  Out run(const BasicMetaNet<double>& meta) const {
    const auto fwd = net.forward_path(student, x);
    const auto t_logits = net.logits(teacher, x);
    auto cached = score(meta, t_logits, fwd.logits);
    const auto ce = cross_entropy(fwd.logits, std::span<const int>(y));
    const auto kd = soft_cross_entropy(fwd.logits, softmax(t_logits));
    const auto g_ce = net.backward_path(student, fwd.cache, ce.grad_logits);
    auto g_kd = net.backward_path(student, fwd.cache, kd.grad_logits);
    auto total = g_ce;
    for (auto& [k, p] : total) {
      auto scaled = g_kd.at(k);
      for (auto& [n, t] : scaled) {
        for (auto& e : t.data()) e *= cached.rho;
      }
      add_in_place(p, scaled);
    }
    auto next = net;
    next.apply_path_grads(student, total, eta);
    const auto vf = next.forward_path(student, xv);
    const auto val = cross_entropy(vf.logits, std::span<const int>(yv));
    return {val.loss, std::move(cached), std::move(g_kd), next.backward_path(student, vf.cache, val.grad_logits)};
  }
};

}  // namespace

TEST_CASE("hypergradient matches finite differences of the validation loss") {
  Pipeline pipe;
  Rng rng(40);
  auto meta = BasicMetaNet<double>::init(3, 5, rng, 1.0);
  for (auto& [n, t] : meta.params.at("layer1")) {
    for (auto& v : t.data()) v += 0.1;  // keep most hidden units active
  }
  const auto base = pipe.run(meta);
  const auto h = hypergradient(meta, base.cached, base.v, base.g_kd, pipe.eta);
  for (auto& [layer, p] : meta.params) {
    for (auto& [name, t] : p) {
      std::vector<double> th(t.data().begin(), t.data().end());
      const auto num = oracle::numeric_grad(
          th,
          [&]() {
            std::copy(th.begin(), th.end(), t.data().begin());
            return pipe.run(meta).r;
          },
          1e-4);
      std::copy(th.begin(), th.end(), t.data().begin());
      const auto& a = h.at(layer).at(name);
      CAPTURE(layer);
      CAPTURE(name);
      CHECK(oracle::rel_error({a.data().begin(), a.data().end()}, num) <= 1e-3);
    }
  }
}

TEST_CASE("a small meta step does not increase the validation loss") {
  Pipeline pipe;
  for (std::uint64_t seed : {41, 42, 43}) {
    Rng rng(seed);
    auto meta = BasicMetaNet<double>::init(3, 5, rng, 1.0);
    const auto base = pipe.run(meta);
    const auto h = hypergradient(meta, base.cached, base.v, base.g_kd, pipe.eta);
    const auto next = meta_step(meta, h, 1e-2);
    CHECK(pipe.run(next).r <= base.r + 1e-12);
  }
}

TEST_CASE("meta step arithmetic") {
  auto meta = scalar_meta(2.0f, 0.5f, -1.5f, 0.25f);
  MetaGrads g;
  g["layer1"].emplace("weight", Tensor({1, 1}, 1.0f));
  g["layer1"].emplace("bias", Tensor({1}, -2.0f));
  g["layer2"].emplace("weight", Tensor({1, 1}, 0.5f));
  g["layer2"].emplace("bias", Tensor({1}, 0.0f));
  CHECK(meta_step(meta, g, 0.0f) == meta);
  auto zero = g;
  scale_in_place(zero, 0.0f);
  CHECK(meta_step(meta, zero, 0.7f) == meta);
  const auto next = meta_step(meta, g, 0.5f);
  CHECK(next.params.at("layer1").at("weight")[0] == 1.5f);
  CHECK(next.params.at("layer1").at("bias")[0] == 1.5f);
  CHECK(next.params.at("layer2").at("weight")[0] == -1.75f);
  CHECK(next.params.at("layer2").at("bias")[0] == 0.25f);
  g.erase("layer2");
  CHECK_THROWS_AS(meta_step(meta, g, 0.5f), ShapeError);
}
