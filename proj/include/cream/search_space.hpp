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

#ifndef CREAM_SEARCH_SPACE_HPP
#define CREAM_SEARCH_SPACE_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "cream/numerics.hpp"
#include "cream/rng.hpp"

namespace cream {

enum class OpFamily { mbconv, resblock, conv2d, skip };

/// One candidate operator of a choice block.
struct OperatorSpec {
  OpFamily family = OpFamily::skip;
  int kernel = 0;     // 0 for skip
  int expansion = 0;  // mbconv only

  static OperatorSpec mbconv(int kernel, int expansion) { return {OpFamily::mbconv, kernel, expansion}; }
  static OperatorSpec resblock() { return {OpFamily::resblock, 3, 0}; }
  static OperatorSpec conv(int kernel) { return {OpFamily::conv2d, kernel, 0}; }
  static OperatorSpec skip() { return {}; }

  bool is_skip() const noexcept { return family == OpFamily::skip; }
  void validate() const;

  /// "mbconv_k3_e4", "resblock_k3", "conv2d_k5", "skip".
  std::string name() const;
  static OperatorSpec parse(std::string_view text);

  friend bool operator==(const OperatorSpec&, const OperatorSpec&) = default;
};

struct StageConfig {
  std::size_t channels = 8;
  int max_repeat = 1;
  int stride = 1;
  std::vector<OperatorSpec> operators;

  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

struct SpaceConfig {
  std::size_t input_channels = 1;
  std::size_t resolution = 16;
  std::size_t classes = 4;
  std::size_t stem_channels = 8;
  int stem_stride = 2;
  /// Adds a 3x3 depthwise-separable conv after the stem conv.
  bool stem_separable = false;
  int separable_stride = 1;
  std::vector<StageConfig> stages;
  std::size_t head_channels = 16;
  /// Hidden dense width after pooling; 0 disables it.
  std::size_t head_hidden = 0;

  friend bool operator==(const SpaceConfig&, const SpaceConfig&) = default;
};

/// 3 stages x 1 block x {mbconv_k3_e2, mbconv_k5_e4, skip}: 27 paths.
SpaceConfig micro_space_config();
/// Micro space with resblock and plain conv added: 5 operators, 125 paths.
SpaceConfig micro_extended_space_config();
/// Scaled-down hypernetwork: 16x16 input, channels / 8, kernels {3,5}, expansion {2,4}, repeats 1-2.
SpaceConfig desk_space_config();
/// Full-size layout: 224x224, 7 operators, 5 stages of up to 6 blocks.
SpaceConfig full_space_config();
/// Operator list of the full-size layout: mbconv {3,5,7} x {4,6} plus skip.
std::vector<OperatorSpec> full_operators();

/// Layers of one operator instance, run in sequence; `residual` adds the block input.
struct OperatorLayout {
  std::vector<LayerSpec> layers;
  bool residual = false;
};

OperatorLayout operator_layout(const OperatorSpec& op, std::size_t in_channels, std::size_t out_channels,
                               int stride);

struct ChoiceBlock {
  std::size_t stage = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  int stride = 1;
  std::size_t in_extent = 0;
  std::size_t out_extent = 0;
  /// Allowed operators; skip is dropped from blocks that change the feature shape.
  std::vector<OperatorSpec> operators;
  std::vector<OperatorLayout> layouts;

  bool shape_preserving() const noexcept { return stride == 1 && in_channels == out_channels; }
};

/// Immutable layout of the search space.
struct SpaceSpec {
  SpaceConfig config;
  std::vector<LayerSpec> stem;
  std::size_t stem_out_extent = 0;
  std::vector<ChoiceBlock> blocks;
  std::vector<LayerSpec> head;
  std::size_t head_in_extent = 0;

  std::size_t block_count() const noexcept { return blocks.size(); }
  /// Number of distinct paths, saturating at UINT64_MAX.
  std::uint64_t path_count() const noexcept;
};

SpaceSpec build_space(const SpaceConfig& config);

/// One operator index per choice block.
struct PathSpec {
  std::vector<int> choices;

  friend bool operator==(const PathSpec&, const PathSpec&) = default;
  friend auto operator<=>(const PathSpec&, const PathSpec&) = default;
};

void validate_path(const SpaceSpec& space, const PathSpec& path);

/// "0-2-1"; the empty path encodes as "".
std::string encode(const PathSpec& path);
PathSpec decode(std::string_view text, const SpaceSpec& space);

PathSpec sample_uniform(const SpaceSpec& space, Rng& rng);

/// Rejection sampling inside [min_flops, max_flops]; throws InfeasibleError after max_tries draws.
PathSpec sample_in_flops_range(const SpaceSpec& space, Rng& rng, std::uint64_t min_flops, std::uint64_t max_flops,
                               std::size_t max_tries);

/// Multiply-accumulates of one layer for a single sample with square input extent.
std::uint64_t layer_macs(const LayerSpec& layer, std::size_t in_extent);
std::uint64_t stem_flops(const SpaceSpec& space);
std::uint64_t head_flops(const SpaceSpec& space);
std::uint64_t block_flops(const SpaceSpec& space, std::size_t block, int choice);
std::uint64_t count_flops(const SpaceSpec& space, const PathSpec& path);

/// All paths in lexicographic order; throws InfeasibleError when the space has more than `cap` paths.
std::vector<PathSpec> enumerate(const SpaceSpec& space, std::uint64_t cap);

}  // namespace cream

#endif  // CREAM_SEARCH_SPACE_HPP
