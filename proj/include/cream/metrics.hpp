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

#ifndef CREAM_METRICS_HPP
#define CREAM_METRICS_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cream/board.hpp"

namespace cream {

struct StepReport;
struct MetaReport;

/// One-line JSON records of the metrics log.
std::string step_record(const StepReport& report, const Board& board);
std::string meta_record(const MetaReport& report);
std::string final_record(const PathSpec& path, double accuracy, std::uint64_t flops);

/// Append-only JSONL writer; each record is flushed as soon as it is written.
class MetricsWriter {
 public:
  /// Opens `path` for appending after truncating it to `keep_bytes` (resume) or to zero.
  MetricsWriter(const std::filesystem::path& path, std::uint64_t keep_bytes = 0);

  void write(const std::string& line);
  std::uint64_t bytes_written() const noexcept { return bytes_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::uint64_t bytes_ = 0;
};

struct PlotRow {
  std::uint64_t flops = 0;
  double accuracy = 0.0;
  std::string path;
};

/// (flops, accuracy) of every architecture evaluated in a metrics log.
std::vector<PlotRow> plot_rows(const std::vector<std::string>& jsonl_lines);
std::vector<std::string> read_lines(const std::filesystem::path& path);
/// CSV with header "path,flops,accuracy".
void emit_plot_data(const std::vector<PlotRow>& rows, const std::filesystem::path& out);

}  // namespace cream

#endif  // CREAM_METRICS_HPP
