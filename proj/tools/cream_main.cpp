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

// Command-line front end. Exit codes: 0 success, 1 config error, 2 runtime error.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "cream/checkpoint.hpp"
#include "cream/config.hpp"
#include "cream/metrics.hpp"

namespace {

using namespace cream;
namespace fs = std::filesystem;
using json = nlohmann::json;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string resume;
  std::string out;
  std::string mode;
  std::string path;
};

RunConfig resolve(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required", "config");
  RunConfig c = load_config(o.config);
  if (o.seed) c.train.seed = *o.seed;
  if (!o.mode.empty()) {
    if (o.mode == "cream") {
      c.train.mode = SearchMode::cream;
    } else if (o.mode == "spos") {
      c.train.mode = SearchMode::spos;
    } else {
      throw ConfigError("expected cream or spos", "--mode");
    }
  }
  if (!o.out.empty()) c.output_dir = o.out;
  validate_config(c);
  return c;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  f << text;
  if (!f) throw IoError("write failed for " + p.string());
}

int cmd_search(const Options& o) {
  const RunConfig c = resolve(o);
  fs::create_directories(c.output_dir);
  const Dataset data = load_dataset(c);
  auto space = std::make_shared<const SpaceSpec>(build_space(c.space));
  const fs::path ckpt = c.output_dir / "checkpoint.crm";

  std::optional<TrainState> state;
  std::uint64_t keep = 0;
  if (!o.resume.empty()) {
    auto loaded = load_checkpoint(o.resume, c.train, space, data);
    keep = loaded.metrics_bytes;
    state.emplace(std::move(loaded.state));
    std::cerr << "resuming at step " << state->step << "\n";
  } else {
    state.emplace(init_state(c.train, space, data));
  }
  write_text(c.output_dir / "config.json", serialize_config(c));
  MetricsWriter metrics(c.output_dir / "metrics.jsonl", keep);

  SearchHooks hooks;
  hooks.on_metrics = [&](const std::string& line) { metrics.write(line); };
  hooks.after_step = [&](const TrainState& s) {
    if (c.checkpoint_interval && s.step % c.checkpoint_interval == 0) save_checkpoint(s, ckpt, metrics.bytes_written());
  };
  const auto result = continue_search(std::move(*state), data, hooks);
  save_checkpoint(result.state, ckpt, metrics.bytes_written());

  json summary = {{"path", encode(result.final_path)},
                  {"accuracy", result.final_accuracy},
                  {"flops", result.final_flops},
                  {"mode", to_string(c.train.mode)},
                  {"seed", c.train.seed}};
  write_text(c.output_dir / "result.json", summary.dump(2) + "\n");
  std::cout << encode(result.final_path) << " acc=" << result.final_accuracy << " flops=" << result.final_flops << "\n";
  return 0;
}

int cmd_rank(const Options& o) {
  const RunConfig c = resolve(o);
  fs::create_directories(c.output_dir);
  const Dataset data = load_dataset(c);
  const auto report = rank_experiment(c.train, c.space, data, c.rank);
  std::ofstream csv(c.output_dir / "rank.csv");
  write_rank_csv(csv, build_space(c.space), report);
  json j = {{"mode", to_string(c.train.mode)},
            {"seed", c.train.seed},
            {"paths", report.paths.size()},
            {"kendall_tau", report.tau},
            {"kendall_tau_per_seed", report.tau_per_seed},
            {"mean_supernet_accuracy", report.mean_supernet_accuracy},
            {"final_path", encode(report.final_path)}};
  write_text(c.output_dir / "rank.json", j.dump(2) + "\n");
  std::cout << "kendall_tau=" << report.tau << " paths=" << report.paths.size() << "\n";
  return 0;
}

int cmd_ablate(const Options& o) {
  const RunConfig c = resolve(o);
  fs::create_directories(c.output_dir);
  const Dataset data = load_dataset(c);
  const auto rows = ablation_driver(c.train, c.space, data, c.rank, c.ablation);
  std::ofstream csv(c.output_dir / "ablation.csv");
  write_ablation_csv(csv, c.ablation.knob, rows);
  write_ablation_csv(std::cout, c.ablation.knob, rows);
  return 0;
}

int cmd_scratch(const Options& o) {
  const RunConfig c = resolve(o);
  const Dataset data = load_dataset(c);
  auto space = std::make_shared<const SpaceSpec>(build_space(c.space));
  const PathSpec path = decode(o.path, *space);
  ScratchConfig sc = c.rank.scratch;
  if (o.seed) sc.seed = *o.seed;
  const double acc = train_from_scratch(space, path, data, sc);
  std::cout << encode(path) << " acc=" << acc << " flops=" << count_flops(*space, path) << "\n";
  return 0;
}

int cmd_export(const Options& o) {
  const RunConfig c = resolve(o);
  const fs::path result = c.output_dir / "result.json";
  std::ifstream f(result);
  if (!f) throw IoError("no search result at " + result.string());
  const auto j = json::parse(f);
  std::cout << j.at("path").get<std::string>() << " " << j.at("flops").get<std::uint64_t>() << "\n";
  return 0;
}

int cmd_plot(const Options& o) {
  const RunConfig c = resolve(o);
  const auto rows = plot_rows(read_lines(c.output_dir / "metrics.jsonl"));
  emit_plot_data(rows, c.output_dir / "plot.csv");
  std::cout << rows.size() << " evaluated architectures -> " << (c.output_dir / "plot.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prioritized-path one-shot architecture search"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration (JSON)")->required();
    sub->add_option("--seed", o.seed, "Override train.seed");
    sub->add_option("--out", o.out, "Override output.dir");
    sub->add_option("--mode", o.mode, "cream or spos");
  };
  auto* search = app.add_subcommand("search", "Train the supernet and pick a final path");
  common(search);
  search->add_option("--resume", o.resume, "Checkpoint to resume from");
  auto* rank = app.add_subcommand("rank", "Kendall tau between supernet and stand-alone rankings");
  common(rank);
  auto* ablate = app.add_subcommand("ablate", "Sweep one knob and tabulate tau");
  common(ablate);
  auto* scratch = app.add_subcommand("scratch", "Train one path from scratch");
  common(scratch);
  scratch->add_option("--path", o.path, "Path encoding such as 0-2-1")->required();
  auto* exp = app.add_subcommand("export", "Print the final path and its flops");
  common(exp);
  auto* plot = app.add_subcommand("plot-data", "Write (flops, accuracy) CSV from the metrics log");
  common(plot);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    if (*search) return cmd_search(o);
    if (*rank) return cmd_rank(o);
    if (*ablate) return cmd_ablate(o);
    if (*scratch) return cmd_scratch(o);
    if (*exp) return cmd_export(o);
    if (*plot) return cmd_plot(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
