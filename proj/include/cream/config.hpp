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

// Run configuration as JSON.
//
// Top-level sections, all optional except "dataset":
//
//   space     {"preset": "micro" | "micro_extended" | "desk" | "full", plus any SpaceConfig field;
//              "stages": [{"channels", "max_repeat", "stride", "operators": ["mbconv_k3_e2", "skip", ...]}]}
//   train     {mode, seed, total_steps, lr0, schedule, momentum, batch_size, eval_batch_size,
//              eval_interval, init_scale}
//   board     {size, flops_min, flops_max, val_subset, max_tries}
//   meta      {interval, lr, hidden, init_scale, batch_size, rho_override}
//   dataset   {"synthetic": {classes, resolution, n_train, n_val, noise, seed, period}}
//             or {"idx": {train_images, train_labels, val_images, val_labels}}
//   output    {dir, checkpoint_interval}
//   scratch   {seed, steps, lr0, schedule, batch_size, eval_batch_size, init_scale}
//   rank      {enumerate_cap, samples, scratch_seeds}
//   ablation  {knob, grid, seeds}
//
// Unknown keys are errors. Synthetic classes and resolution default to the space's.

#ifndef CREAM_CONFIG_HPP
#define CREAM_CONFIG_HPP

#include <filesystem>
#include <string>
#include <variant>

#include "cream/dataset.hpp"
#include "cream/evaluator.hpp"
#include "cream/search_space.hpp"
#include "cream/trainer.hpp"

namespace cream {

struct IdxSource {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path val_images;
  std::filesystem::path val_labels;

  friend bool operator==(const IdxSource&, const IdxSource&) = default;
};

struct RunConfig {
  SpaceConfig space = micro_space_config();
  TrainConfig train;
  std::variant<SyntheticSpec, IdxSource> dataset;
  std::filesystem::path output_dir = "runs/default";
  /// Save a checkpoint every this many steps; 0 saves only at the end.
  std::size_t checkpoint_interval = 100;
  RankConfig rank;  // "scratch" section maps to rank.scratch
  AblationConfig ablation;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses and validates; `source` names the input in error messages.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Fully expanded JSON (no preset); parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

void validate_config(const RunConfig& config);

Dataset load_dataset(const RunConfig& config);

}  // namespace cream

#endif  // CREAM_CONFIG_HPP
