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

#ifndef CREAM_BOARD_HPP
#define CREAM_BOARD_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cream/dataset.hpp"
#include "cream/rng.hpp"
#include "cream/search_space.hpp"
#include "cream/supernet.hpp"

namespace cream {

struct BoardEntry {
  PathSpec path;
  double accuracy = 0.0;  // top-1 on the val subset when the entry was admitted
  std::uint64_t flops = 0;

  friend bool operator==(const BoardEntry&, const BoardEntry&) = default;
};

struct InsertResult {
  std::optional<std::size_t> replaced;  // empty when the candidate was rejected

  bool accepted() const noexcept { return replaced.has_value(); }
  static InsertResult rejected() { return {}; }
};

/// Prioritized path board: K distinct paths under selective competition.
///
/// A candidate may take slot k only if it is at least as accurate and at most
/// as expensive as entries[k], lies inside the flops bounds, and is not already
/// on the board. Among qualifying slots the weakest goes first: lowest
/// accuracy, then highest flops, then lowest index.
class Board {
 public:
  /// K distinct random paths with flops in [flops_min, flops_max], accuracy 0.
  static Board init(const SpaceSpec& space, std::size_t k, std::uint64_t flops_min, std::uint64_t flops_max,
                    Rng& rng, std::size_t max_tries = 10000);

  /// Rebuilds a board from stored entries; validates every invariant.
  Board(std::vector<BoardEntry> entries, std::uint64_t flops_min, std::uint64_t flops_max);

  const std::vector<BoardEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::uint64_t flops_min() const noexcept { return flops_min_; }
  std::uint64_t flops_max() const noexcept { return flops_max_; }
  std::optional<std::size_t> find(const PathSpec& path) const;

  InsertResult try_insert(const BoardEntry& candidate);

 private:
  std::vector<BoardEntry> entries_;
  std::uint64_t flops_min_;
  std::uint64_t flops_max_;
};

/// Top-1 accuracy of `path` with inherited weights; ties in the logits go to the lower class.
double evaluate_accuracy(const Supernet& net, const PathSpec& path, const Split& data, std::size_t batch_size);

struct Selection {
  PathSpec path;
  std::size_t index = 0;
  double accuracy = 0.0;
  std::vector<double> accuracies;  // per board entry, on the full validation split
};

/// Re-evaluates every entry on the full validation split and returns the most
/// accurate; ties go to lower flops, then lower index.
Selection final_selection(const Board& board, const Supernet& net, const Split& full_val, std::size_t batch_size);

}  // namespace cream

#endif  // CREAM_BOARD_HPP
