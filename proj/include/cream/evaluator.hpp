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

#ifndef CREAM_EVALUATOR_HPP
#define CREAM_EVALUATOR_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cream/trainer.hpp"

namespace cream {

struct ScratchConfig {
  std::uint64_t seed = 0;
  std::size_t steps = 300;
  double lr0 = 0.1;
  LrSchedule schedule = LrSchedule::linear;
  std::size_t batch_size = 32;
  std::size_t eval_batch_size = 256;
  double init_scale = 1.0;

  void validate() const;
  friend bool operator==(const ScratchConfig&, const ScratchConfig&) = default;
};

/// Trains fresh weights for exactly the layers of `path` with plain CE SGD and
/// returns top-1 accuracy on the full validation split.
double train_from_scratch(std::shared_ptr<const SpaceSpec> space, const PathSpec& path, const Dataset& data,
                          const ScratchConfig& config);

/// Tie-corrected Kendall rank correlation (tau-b).
double kendall_tau(std::span<const double> xs, std::span<const double> ys);

/// Median; the mean of the two middle values for even counts.
/// Tau for comparing two rankings: identical lists agree perfectly (1), and a list
/// with every value tied carries no order (0). Otherwise kendall_tau.
double ranking_tau(std::span<const double> xs, std::span<const double> ys);

double median(std::vector<double> values);

struct RankConfig {
  /// Rank every path when the space has at most this many.
  std::uint64_t enumerate_cap = 128;
  /// Otherwise rank this many distinct uniformly sampled paths.
  std::size_t samples = 30;
  ScratchConfig scratch;
  /// Stand-alone runs per path, seeds scratch.seed, scratch.seed + 1, ...
  std::size_t scratch_seeds = 3;

  void validate() const;
  friend bool operator==(const RankConfig&, const RankConfig&) = default;
};

/// Stand-alone accuracy of one path, one value per scratch seed.
using StandaloneFn = std::function<std::vector<double>(const PathSpec&)>;

/// Memoizing stand-alone oracle backed by `train_from_scratch`.
StandaloneFn scratch_oracle(std::shared_ptr<const SpaceSpec> space, const Dataset& data, const RankConfig& config);

/// The paths a rank experiment scores, in lexicographic order.
std::vector<PathSpec> rank_paths(const SpaceSpec& space, const RankConfig& config, std::uint64_t seed);

struct RankReport {
  std::vector<PathSpec> paths;
  std::vector<double> supernet_accuracy;                  // inherited weights, full val
  std::vector<double> standalone_accuracy;                // median over scratch seeds
  std::vector<std::vector<double>> standalone_per_seed;   // [seed][path]
  double tau = 0.0;
  std::vector<double> tau_per_seed;
  /// Mean inherited-weight accuracy over the ranked paths.
  double mean_supernet_accuracy = 0.0;
  /// Path picked by the search.
  PathSpec final_path;
};

/// Scores `paths` with inherited weights and correlates them with the stand-alone oracle.
RankReport rank_supernet(const Supernet& net, const std::vector<PathSpec>& paths, const Dataset& data,
                         std::size_t eval_batch_size, const StandaloneFn& standalone);

/// Search, then rank. Without an injected oracle, stand-alone accuracies come from scratch training.
RankReport rank_experiment(const TrainConfig& train, const SpaceConfig& space, const Dataset& data,
                           const RankConfig& rank, StandaloneFn standalone = {});

enum class AblationKnob { board_size, val_subset };

std::string to_string(AblationKnob knob);
AblationKnob parse_knob(const std::string& text);

struct AblationConfig {
  AblationKnob knob = AblationKnob::board_size;
  /// Values of the knob; for val_subset, 0 stands for the full validation split.
  std::vector<std::size_t> grid{1, 5, 10, 20, 50};
  std::vector<std::uint64_t> seeds{0};

  void validate() const;
  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

struct AblationRow {
  std::size_t value = 0;
  double tau = 0.0;  // median over seeds
  std::vector<double> taus;
  double seconds = 0.0;
};

/// board_size: one rank experiment per grid value and seed.
/// val_subset: one search per seed; each grid value then ranks the candidate
/// paths by subset accuracy and correlates that with the full-split ranking.
std::vector<AblationRow> ablation_driver(const TrainConfig& train, const SpaceConfig& space, const Dataset& data,
                                         const RankConfig& rank, const AblationConfig& ablation,
                                         StandaloneFn standalone = {});

/// Header "knob,value,tau,taus,seconds"; per-seed taus are ';'-separated.
void write_ablation_csv(std::ostream& out, AblationKnob knob, const std::vector<AblationRow>& rows);

/// Header "path,flops,supernet_acc,standalone_acc".
void write_rank_csv(std::ostream& out, const SpaceSpec& space, const RankReport& report);

}  // namespace cream

#endif  // CREAM_EVALUATOR_HPP
