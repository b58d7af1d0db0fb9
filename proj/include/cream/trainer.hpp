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

#ifndef CREAM_TRAINER_HPP
#define CREAM_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cream/board.hpp"
#include "cream/dataset.hpp"
#include "cream/matcher.hpp"
#include "cream/supernet.hpp"

namespace cream {

enum class SearchMode { cream, spos };
enum class LrSchedule { linear, constant };

std::string to_string(SearchMode mode);
std::string to_string(LrSchedule schedule);

struct TrainConfig {
  SearchMode mode = SearchMode::cream;
  std::uint64_t seed = 0;
  std::size_t total_steps = 500;
  double lr0 = 0.1;
  LrSchedule schedule = LrSchedule::linear;
  double momentum = 0.0;
  std::size_t batch_size = 32;
  std::size_t eval_batch_size = 256;
  /// Evaluate the sampled path and offer it to the board every `eval_interval` steps.
  std::size_t eval_interval = 1;
  double init_scale = 1.0;

  std::size_t board_size = 10;
  std::uint64_t flops_min = 0;
  std::uint64_t flops_max = std::numeric_limits<std::uint64_t>::max();
  /// Validation images used to score candidates; 0 means the full split.
  std::size_t val_subset = 256;
  std::size_t board_max_tries = 10000;

  std::size_t meta_interval = 20;
  double meta_lr = 0.5;
  std::size_t meta_hidden = 64;
  double meta_init_scale = 1.0;
  /// Validation images per meta update; 0 means `batch_size`.
  std::size_t meta_batch_size = 0;
  /// Fixed distillation weight in place of rho. 0 turns distillation off.
  std::optional<double> rho_override;

  void validate(std::size_t val_size) const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// lr0 * (1 - t / T) for the linear schedule.
double lr_schedule(std::size_t t, std::size_t total, double lr0, LrSchedule schedule = LrSchedule::linear);

/// Distillation state kept from a train step for the meta update that follows it.
struct PendingMeta {
  std::size_t step = 0;
  PathSpec student;
  MatchScore<float> score;
  PathGrads g_kd;
  double eta = 0.0;
};

struct TrainState {
  TrainConfig config;
  std::shared_ptr<const SpaceSpec> space;
  Split val_subset;
  std::size_t step = 0;
  Supernet net;
  Board board;
  MetaNet meta;
  Rng sample_rng;
  Rng board_rng;
  Rng data_rng;
  Rng meta_rng;
  PathGrads velocity;  // momentum buffers, only for layers that have been trained
  std::optional<PendingMeta> pending;
};

/// Seeds every component from `config.seed` and initializes weights, board and meta network.
TrainState init_state(const TrainConfig& config, std::shared_ptr<const SpaceSpec> space, const Dataset& data);

/// Validation subset: prefix of a seeded shuffle of the validation split.
Split make_val_subset(const Split& val, std::size_t size, std::uint64_t seed);

struct StepReport {
  std::size_t step = 0;
  PathSpec path;
  std::uint64_t flops = 0;
  double lr = 0.0;
  double loss_ce = 0.0;
  double loss_kd = 0.0;
  double rho = 0.0;
  std::optional<std::size_t> teacher;
  bool fallback = false;  // cream mode found no teacher distinct from the student
  std::optional<double> accuracy;
  std::optional<InsertResult> insert;
};

struct MetaReport {
  std::size_t step = 0;
  double val_loss = 0.0;  // R at the updated weights
  double scale = 0.0;     // -eta <v, g_kd>
  double rho = 0.0;
};

/// Loss gradient at the student logits: grad_ce + weight * grad_kd.
Tensor combine_logit_grads(const Tensor& grad_ce, const Tensor& grad_kd, float weight);

/// One search iteration on `batch`: sample, (cream) pick a teacher and
/// distill, SGD step, then score the path and offer it to the board.
StepReport train_step(TrainState& state, const Batch& batch);

/// Meta-network update after the step at index t when t % interval == 0
/// (cream mode with a teacher only).
std::optional<MetaReport> maybe_meta_update(TrainState& state, const Batch& val_batch);

bool meta_update_due(const TrainState& state, std::size_t step);

Batch next_train_batch(TrainState& state, const Dataset& data);
Batch next_meta_batch(TrainState& state, const Dataset& data);

struct SearchResult {
  PathSpec final_path;
  double final_accuracy = 0.0;
  std::uint64_t final_flops = 0;
  Board board;
  std::vector<std::string> metrics;  // JSONL lines written during this call
  TrainState state;
};

struct SearchHooks {
  /// Called with every metrics line as it is produced.
  std::function<void(const std::string&)> on_metrics;
  /// Called after step `state.step - 1` completes (metrics already emitted).
  std::function<void(const TrainState&)> after_step;
  /// Stop after this many total steps without running final selection.
  std::optional<std::size_t> stop_at;
};

/// Runs the remaining steps of `state` and then selects the final path from the board.
SearchResult continue_search(TrainState state, const Dataset& data, const SearchHooks& hooks = {});

SearchResult run_search(const TrainConfig& config, const SpaceConfig& space, const Dataset& data,
                        const SearchHooks& hooks = {});

}  // namespace cream

#endif  // CREAM_TRAINER_HPP
