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

// Binary checkpoint layout, little-endian throughout:
//
//   "CRM1"  u32 version  u32 record_count
//   record: u32 name_len  name  u32 rank  u32 dims[rank]  u32 payload[prod(dims)]
//   u32 CRC-32 of every preceding byte
//
// Float tensors store their IEEE bits; integers and doubles are split into
// two u32 words (low first) in records whose last dimension is 2.

#ifndef CREAM_CHECKPOINT_HPP
#define CREAM_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cream/trainer.hpp"

namespace cream {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint32_t> words;

  friend bool operator==(const CheckpointRecord&, const CheckpointRecord&) = default;
};

std::vector<std::uint8_t> encode_records(const std::vector<CheckpointRecord>& records);
/// Validates magic, version and checksum.
std::vector<CheckpointRecord> decode_records(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary file beside `path`, then renames it into place.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path, std::uint64_t metrics_bytes = 0);

struct LoadedCheckpoint {
  TrainState state;
  std::uint64_t metrics_bytes = 0;
};

/// Rebuilds the state of a run with this config; a checkpoint from a different space is rejected.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig& config,
                                 std::shared_ptr<const SpaceSpec> space, const Dataset& data);

}  // namespace cream

#endif  // CREAM_CHECKPOINT_HPP
