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

#include "cream/metrics.hpp"

#include <json.hpp>

#include "cream/trainer.hpp"

namespace cream {

using json = nlohmann::json;

std::string step_record(const StepReport& r, const Board& board) {
  json j;
  j["event"] = "step";
  j["step"] = r.step;
  j["path"] = encode(r.path);
  j["flops"] = r.flops;
  j["lr"] = r.lr;
  j["loss_ce"] = r.loss_ce;
  j["loss_kd"] = r.loss_kd;
  j["rho"] = r.rho;
  j["teacher"] = r.teacher ? json(*r.teacher) : json(nullptr);
  j["fallback"] = r.fallback;
  j["acc"] = r.accuracy ? json(*r.accuracy) : json(nullptr);
  if (!r.insert) {
    j["insert"] = nullptr;
  } else {
    j["insert"] = r.insert->replaced ? json(*r.insert->replaced) : json(-1);
  }
  json entries = json::array();
  for (const auto& e : board.entries()) entries.push_back({encode(e.path), e.accuracy, e.flops});
  j["board"] = std::move(entries);
  return j.dump();
}

std::string meta_record(const MetaReport& r) {
  json j;
  j["event"] = "meta";
  j["step"] = r.step;
  j["val_loss"] = r.val_loss;
  j["scale"] = r.scale;
  j["rho"] = r.rho;
  return j.dump();
}

std::string final_record(const PathSpec& path, double accuracy, std::uint64_t flops) {
  json j;
  j["event"] = "final";
  j["path"] = encode(path);
  j["acc"] = accuracy;
  j["flops"] = flops;
  return j.dump();
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, std::uint64_t keep_bytes) : path_(path) {
  if (keep_bytes > 0) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec || size < keep_bytes) throw IoError("metrics log " + path.string() + " is shorter than the checkpoint");
    std::filesystem::resize_file(path, keep_bytes);
    out_.open(path, std::ios::binary | std::ios::app);
  } else {
    out_.open(path, std::ios::binary | std::ios::trunc);
  }
  if (!out_) throw IoError("cannot open metrics log " + path.string());
  bytes_ = keep_bytes;
}

void MetricsWriter::write(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw IoError("write failed for " + path_.string());
  bytes_ += line.size() + 1;
}

std::vector<PlotRow> plot_rows(const std::vector<std::string>& lines) {
  std::vector<PlotRow> rows;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    if (j.value("event", "") != "step" || j["acc"].is_null()) continue;
    rows.push_back({j["flops"].get<std::uint64_t>(), j["acc"].get<double>(), j["path"].get<std::string>()});
  }
  return rows;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

void emit_plot_data(const std::vector<PlotRow>& rows, const std::filesystem::path& out) {
  std::ofstream f(out);
  if (!f) throw IoError("cannot write " + out.string());
  f << "path,flops,accuracy\n";
  for (const auto& r : rows) f << r.path << ',' << r.flops << ',' << json(r.accuracy).dump() << '\n';
  if (!f) throw IoError("write failed for " + out.string());
}

}  // namespace cream
