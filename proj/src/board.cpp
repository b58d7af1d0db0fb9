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

#include "cream/board.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace cream {

Board Board::init(const SpaceSpec& space, std::size_t k, std::uint64_t flops_min, std::uint64_t flops_max, Rng& rng,
                  std::size_t max_tries) {
  if (k == 0) throw ConfigError("board size must be at least 1", "board.size");
  if (flops_min > flops_max) throw ConfigError("min flops exceeds max flops", "board.flops_min");
  std::vector<BoardEntry> entries;
  std::size_t tries = 0;
  while (entries.size() < k) {
    if (tries >= max_tries) {
      throw InfeasibleError("could not find " + std::to_string(k) + " distinct paths with flops in [" +
                            std::to_string(flops_min) + ", " + std::to_string(flops_max) + "]");
    }
    ++tries;
    PathSpec p = sample_uniform(space, rng);
    const auto f = count_flops(space, p);
    if (f < flops_min || f > flops_max) continue;
    if (std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.path == p; })) continue;
    entries.push_back({std::move(p), 0.0, f});
  }
  return Board(std::move(entries), flops_min, flops_max);
}

Board::Board(std::vector<BoardEntry> entries, std::uint64_t flops_min, std::uint64_t flops_max)
    : entries_(std::move(entries)), flops_min_(flops_min), flops_max_(flops_max) {
  if (entries_.empty()) throw ConfigError("board size must be at least 1", "board.size");
  std::set<PathSpec> seen;
  for (const auto& e : entries_) {
    if (e.flops < flops_min_ || e.flops > flops_max_) throw FormatError("board entry outside the flops bounds");
    if (!(e.accuracy >= 0.0 && e.accuracy <= 1.0)) throw FormatError("board accuracy outside [0, 1]");
    if (!seen.insert(e.path).second) throw FormatError("duplicate board path " + encode(e.path));
  }
}

std::optional<std::size_t> Board::find(const PathSpec& path) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].path == path) return i;
  }
  return std::nullopt;
}

InsertResult Board::try_insert(const BoardEntry& candidate) {
  if (candidate.flops < flops_min_ || candidate.flops > flops_max_) return InsertResult::rejected();
  if (find(candidate.path)) return InsertResult::rejected();
  std::optional<std::size_t> target;
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto& e = entries_[k];
    if (candidate.accuracy < e.accuracy || candidate.flops > e.flops) continue;
    if (!target) {
      target = k;
      continue;
    }
    const auto& t = entries_[*target];
    if (e.accuracy < t.accuracy || (e.accuracy == t.accuracy && e.flops > t.flops)) target = k;
  }
  if (!target) return InsertResult::rejected();
  entries_[*target] = candidate;
  return {target};
}

double evaluate_accuracy(const Supernet& net, const PathSpec& path, const Split& data, std::size_t batch_size) {
  if (data.empty()) throw ShapeError("evaluation split is empty");
  if (batch_size == 0) throw ConfigError("must be positive", "train.eval_batch_size");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch b = gather(data, idx);
    const Tensor logits = net.logits(path, b.images);
    const std::size_t c = logits.dim(1);
    for (std::size_t r = 0; r < b.size(); ++r) {
      const float* row = logits.raw() + r * c;
      const auto pred = static_cast<int>(std::max_element(row, row + c) - row);
      if (pred == b.labels[r]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Selection final_selection(const Board& board, const Supernet& net, const Split& full_val, std::size_t batch_size) {
  if (full_val.empty()) throw ShapeError("validation split is empty");
  Selection s;
  for (const auto& e : board.entries()) s.accuracies.push_back(evaluate_accuracy(net, e.path, full_val, batch_size));
  for (std::size_t k = 1; k < board.size(); ++k) {
    const double a = s.accuracies[k], best = s.accuracies[s.index];
    if (a > best || (a == best && board.entries()[k].flops < board.entries()[s.index].flops)) s.index = k;
  }
  s.path = board.entries()[s.index].path;
  s.accuracy = s.accuracies[s.index];
  return s;
}

}  // namespace cream
