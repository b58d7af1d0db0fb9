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

#ifndef CREAM_DATASET_HPP
#define CREAM_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cream/tensor.hpp"

namespace cream {

/// Images [N, C, R, R] with one label per image.
struct Split {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
};

using Batch = Split;

struct Dataset {
  Split train;
  Split val;
  std::size_t classes = 0;
  std::size_t channels = 1;
  std::size_t resolution = 0;
};

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t resolution = 16;
  std::size_t n_train = 1024;
  std::size_t n_val = 512;
  double noise = 0.3;
  std::uint64_t seed = 0;
  /// Spatial period of the bars in pixels.
  double period = 5.0;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Oriented sinusoidal bars: class c has orientation c * pi / classes, with a
/// random phase and contrast per image plus Gaussian pixel noise. Labels cycle
/// 0..C-1 so every class count differs by at most one.
Dataset gen_synthetic(const SyntheticSpec& spec);

/// Noise-free bar image of one class at the given phase, values in [0, 1].
std::vector<float> bar_pattern(std::size_t resolution, double angle, double phase, double contrast, double period);

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801); pixels scale to [0, 1].
Split load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Copies the listed rows into a new batch.
Batch gather(const Split& split, std::span<const std::size_t> indices);

/// First `count` rows (all if count >= size).
Split take_prefix(const Split& split, std::size_t count);

}  // namespace cream

#endif  // CREAM_DATASET_HPP
