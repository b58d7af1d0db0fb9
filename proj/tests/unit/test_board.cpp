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

#include <random>
#include <algorithm>
#include <set>

#include "cream/board.hpp"

using namespace cream;

namespace {

PathSpec p(std::vector<int> c) { return PathSpec{std::move(c)}; }

Board two_entry_board() {
  return Board({{p({0, 0, 0}), 0.60, 100}, {p({1, 1, 1}), 0.50, 90}}, 0, 1000);
}

/// Replacement target computed straight from the admission rule.
std::optional<std::size_t> expected_target(const std::vector<BoardEntry>& entries, const BoardEntry& c,
                                           std::uint64_t lo, std::uint64_t hi) {
  if (c.flops < lo || c.flops > hi) return std::nullopt;
  for (const auto& e : entries) {
    if (e.path == c.path) return std::nullopt;
  }
  std::vector<std::size_t> q;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (c.accuracy >= entries[k].accuracy && c.flops <= entries[k].flops) q.push_back(k);
  }
  if (q.empty()) return std::nullopt;
  std::sort(q.begin(), q.end(), [&](std::size_t a, std::size_t b) {
    if (entries[a].accuracy != entries[b].accuracy) return entries[a].accuracy < entries[b].accuracy;
    if (entries[a].flops != entries[b].flops) return entries[a].flops > entries[b].flops;
    return a < b;
  });
  return q.front();
}

std::shared_ptr<const SpaceSpec> micro() { return std::make_shared<const SpaceSpec>(build_space(micro_space_config())); }

}  // namespace

TEST_CASE("a dominated entry is replaced") {
  auto b = two_entry_board();
  const auto r = b.try_insert({p({2, 2, 2}), 0.55, 80});
  REQUIRE(r.accepted());
  CHECK(*r.replaced == 1);
  CHECK(b.entries()[1] == BoardEntry{p({2, 2, 2}), 0.55, 80});
  CHECK(b.entries()[0].accuracy == 0.60);
}

TEST_CASE("a candidate costlier than every entry is rejected") {
  auto b = two_entry_board();
  const auto before = b.entries();
  CHECK_FALSE(b.try_insert({p({2, 2, 2}), 0.70, 120}).accepted());
  CHECK(b.entries() == before);
}

TEST_CASE("a candidate dominating both entries replaces the weaker one") {
  auto b = two_entry_board();
  const auto r = b.try_insert({p({2, 2, 2}), 0.65, 80});
  REQUIRE(r.accepted());
  CHECK(*r.replaced == 1);
}

TEST_CASE("ties in accuracy evict the costlier entry, then the lower index") {
  Board b({{p({0, 0, 0}), 0.5, 100}, {p({1, 1, 1}), 0.5, 120}, {p({2, 2, 2}), 0.5, 120}}, 0, 1000);
  CHECK(*b.try_insert({p({0, 1, 2}), 0.5, 90}).replaced == 1);
}

TEST_CASE("out-of-range and duplicate candidates are rejected") {
  Board b({{p({0, 0, 0}), 0.2, 100}, {p({1, 1, 1}), 0.1, 90}}, 50, 150);
  CHECK_FALSE(b.try_insert({p({2, 2, 2}), 0.9, 40}).accepted());
  CHECK_FALSE(b.try_insert({p({0, 0, 0}), 0.9, 80}).accepted());
  CHECK(b.try_insert({p({2, 2, 2}), 0.9, 50}).accepted());
}

TEST_CASE("board construction checks its invariants") {
  CHECK_THROWS_AS(Board({}, 0, 10), ConfigError);
  CHECK_THROWS_AS(Board({{p({0}), 0.1, 20}}, 0, 10), FormatError);
  CHECK_THROWS_AS(Board({{p({0}), 1.5, 5}}, 0, 10), FormatError);
  CHECK_THROWS_AS(Board({{p({0}), 0.1, 5}, {p({0}), 0.2, 6}}, 0, 10), FormatError);
}

TEST_CASE("random insert sequences keep every board invariant") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> op(0, 3);
  std::uniform_int_distribution<std::uint64_t> fl(0, 200);
  std::uniform_int_distribution<int> acc(0, 20);  // coarse grid so ties are common
  const std::uint64_t lo = 20, hi = 180;
  auto random_path = [&]() { return p({op(gen), op(gen), op(gen)}); };

  for (int seq = 0; seq < 10000; ++seq) {
    std::vector<BoardEntry> init;
    std::set<PathSpec> used;
    const std::size_t k = 1 + seq % 5;
    while (init.size() < k) {
      auto path = random_path();
      if (!used.insert(path).second) continue;
      init.push_back({path, 0.0, lo + fl(gen) % (hi - lo + 1)});
    }
    Board b(init, lo, hi);
    for (int step = 0; step < 20; ++step) {
      const BoardEntry c{random_path(), acc(gen) / 20.0, fl(gen)};
      const auto before = b.entries();
      const auto want = expected_target(before, c, lo, hi);
      const auto got = b.try_insert(c);
      REQUIRE(got.replaced == want);
      REQUIRE(b.size() == k);
      if (got.accepted()) {
        REQUIRE(c.accuracy >= before[*got.replaced].accuracy);
        REQUIRE(c.flops <= before[*got.replaced].flops);
      } else {
        REQUIRE(b.entries() == before);
      }
      std::set<PathSpec> seen;
      for (const auto& e : b.entries()) {
        REQUIRE(e.flops >= lo);
        REQUIRE(e.flops <= hi);
        REQUIRE(seen.insert(e.path).second);
      }
    }
  }
}

TEST_CASE("init draws distinct in-range paths") {
  const auto space = build_space(micro_space_config());
  Rng rng(3);
  const auto one = Board::init(space, 1, 0, UINT64_MAX, rng);
  CHECK(one.size() == 1);
  const auto b = Board::init(space, 10, 0, UINT64_MAX, rng);
  std::set<PathSpec> seen;
  for (const auto& e : b.entries()) {
    CHECK(e.accuracy == 0.0);
    CHECK(e.flops == count_flops(space, e.path));
    CHECK(seen.insert(e.path).second);
  }
  CHECK_THROWS_AS(Board::init(space, 28, 0, UINT64_MAX, rng, 5000), InfeasibleError);
  CHECK_THROWS_AS(Board::init(space, 0, 0, UINT64_MAX, rng), ConfigError);
  CHECK_THROWS_AS(Board::init(space, 1, 10, 5, rng), ConfigError);
}

TEST_CASE("random-weight accuracy stays near chance") {
  auto space = micro();
  auto data = gen_synthetic(SyntheticSpec{});
  // shuffled labels stay balanced and carry no signal, so hits are binomial(n, 1/4)
  std::shuffle(data.val.labels.begin(), data.val.labels.end(), std::mt19937_64(8));
  Rng rng(17);
  auto net = Supernet::init(space, rng, 1.0);
  const double n = static_cast<double>(data.val.size());
  const double three_sigma = 3 * std::sqrt(0.25 * 0.75 / n);
  Rng pr(1);
  for (int i = 0; i < 5; ++i) {
    const auto path = sample_uniform(*space, pr);
    const double a = evaluate_accuracy(net, path, data.val, 64);
    CHECK(std::abs(a - 0.25) <= three_sigma);
    CHECK(evaluate_accuracy(net, path, data.val, 7) == a);  // batching does not matter
  }
  CHECK_THROWS(evaluate_accuracy(net, PathSpec{{0, 0, 0}}, Split{}, 8));
}

TEST_CASE("a constant class-0 predictor scores 1 on a class-0 split") {
  auto space = micro();
  Rng rng(1);
  auto net = Supernet::init(space, rng, 0.0);  // all logits tie, argmax falls to class 0
  auto data = gen_synthetic(SyntheticSpec{});
  Split zeros = data.val;
  std::fill(zeros.labels.begin(), zeros.labels.end(), 0);
  CHECK(evaluate_accuracy(net, PathSpec{{1, 2, 0}}, zeros, 32) == 1.0);
}

TEST_CASE("final selection") {
  auto space = micro();
  const auto data = gen_synthetic(SyntheticSpec{});
  Rng rng(21);
  auto net = Supernet::init(space, rng, 1.0);

  // independent accuracy: argmax over the full logits matrix
  auto oracle_acc = [&](const PathSpec& path) {
    const auto z = net.logits(path, data.val.images);
    std::size_t ok = 0;
    for (std::size_t r = 0; r < data.val.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < 4; ++c) {
        if (z[r * 4 + c] > z[r * 4 + best]) best = c;
      }
      ok += static_cast<int>(best) == data.val.labels[r];
    }
    return static_cast<double>(ok) / static_cast<double>(data.val.size());
  };

  SUBCASE("single entry") {
    Board b({{p({0, 1, 2}), 0.0, count_flops(*space, p({0, 1, 2}))}}, 0, UINT64_MAX);
    const auto s = final_selection(b, net, data.val, 128);
    CHECK(s.path == p({0, 1, 2}));
    CHECK(s.index == 0);
    CHECK(s.accuracy == doctest::Approx(oracle_acc(p({0, 1, 2}))).epsilon(1e-12));
  }
  SUBCASE("strictly better entry wins regardless of stored accuracy") {
    std::vector<std::pair<double, PathSpec>> scored;
    for (const auto& path : enumerate(*space, 100)) scored.emplace_back(oracle_acc(path), path);
    std::sort(scored.begin(), scored.end());
    REQUIRE(scored.front().first < scored.back().first);
    const auto& worst = scored.front().second;
    const auto& best = scored.back().second;
    Board b({{worst, 1.0, count_flops(*space, worst)}, {best, 0.0, count_flops(*space, best)}}, 0, UINT64_MAX);
    const auto s = final_selection(b, net, data.val, 100);
    CHECK(s.path == best);
    CHECK(s.accuracies.size() == 2);
  }
  SUBCASE("equal accuracy falls to fewer flops") {
    Rng r0(1);
    auto flat = Supernet::init(space, r0, 0.0);
    Board b({{p({0, 0, 0}), 0.0, 100}, {p({1, 1, 1}), 0.0, 90}}, 0, 1000);
    const auto s = final_selection(b, flat, data.val, 64);
    CHECK(s.index == 1);
    CHECK(s.accuracies[0] == s.accuracies[1]);
  }
  Board b({{p({0, 0, 0}), 0.0, 100}}, 0, 1000);
  CHECK_THROWS(final_selection(b, net, Split{}, 8));
}
