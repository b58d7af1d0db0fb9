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

#include "cream/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

namespace cream {

void ScratchConfig::validate() const {
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("must be a positive finite number", "scratch.lr0");
  if (batch_size < 1) throw ConfigError("must be at least 1", "scratch.batch_size");
  if (eval_batch_size < 1) throw ConfigError("must be at least 1", "scratch.eval_batch_size");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ConfigError("must be non-negative", "scratch.init_scale");
}

double train_from_scratch(std::shared_ptr<const SpaceSpec> space, const PathSpec& path, const Dataset& data,
                          const ScratchConfig& config) {
  config.validate();
  validate_path(*space, path);
  if (data.train.empty() || data.val.empty()) throw ConfigError("dataset splits must be non-empty", "dataset");
  Rng init_rng = Rng::stream(config.seed, "scratch.init");
  Rng data_rng = Rng::stream(config.seed, "scratch.data");
  auto net = Supernet::init_path(space, path, init_rng, config.init_scale);
  std::vector<std::size_t> idx(config.batch_size);
  for (std::size_t t = 0; t < config.steps; ++t) {
    for (auto& i : idx) i = static_cast<std::size_t>(data_rng.uniform_int(data.train.size()));
    const auto batch = gather(data.train, idx);
    auto fwd = net.forward_path(path, batch.images);
    auto ce = cross_entropy(fwd.logits, std::span<const int>(batch.labels));
    if (!std::isfinite(ce.loss)) {
      throw NonFiniteError("non-finite loss at scratch step " + std::to_string(t) + " for path " + encode(path));
    }
    const auto grads = net.backward_path(path, fwd.cache, ce.grad_logits);
    net.apply_path_grads(path, grads, static_cast<float>(lr_schedule(t, config.steps, config.lr0, config.schedule)));
  }
  return evaluate_accuracy(net, path, data.val, config.eval_batch_size);
}

double kendall_tau(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw ShapeError("kendall_tau: lengths " + std::to_string(xs.size()) + " and " + std::to_string(ys.size()));
  }
  if (xs.size() < 2) throw ShapeError("kendall_tau needs at least two items");
  // tau-b = (C - D) / sqrt((n0 - n1)(n0 - n2)), n1/n2 = pairs tied in x/y
  long long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      if (dx == 0.0 && dy == 0.0) {
        ++tied_x;
        ++tied_y;
      } else if (dx == 0.0) {
        ++tied_x;
      } else if (dy == 0.0) {
        ++tied_y;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const long long n0 = static_cast<long long>(xs.size() * (xs.size() - 1) / 2);
  const double denom = std::sqrt(static_cast<double>(n0 - tied_x) * static_cast<double>(n0 - tied_y));
  if (denom == 0.0) throw ShapeError("kendall_tau is undefined when one list is entirely tied");
  return std::clamp(static_cast<double>(concordant - discordant) / denom, -1.0, 1.0);
}

double ranking_tau(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("ranking_tau: lists differ in length");
  if (std::equal(xs.begin(), xs.end(), ys.begin())) return 1.0;
  auto flat = [](std::span<const double> v) { return std::all_of(v.begin(), v.end(), [&](double a) { return a == v[0]; }); };
  if (flat(xs) || flat(ys)) return 0.0;
  return kendall_tau(xs, ys);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ShapeError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void RankConfig::validate() const {
  if (samples < 2) throw ConfigError("must be at least 2", "rank.samples");
  if (scratch_seeds < 1) throw ConfigError("must be at least 1", "rank.scratch_seeds");
  scratch.validate();
}

StandaloneFn scratch_oracle(std::shared_ptr<const SpaceSpec> space, const Dataset& data, const RankConfig& config) {
  auto cache = std::make_shared<std::map<PathSpec, std::vector<double>>>();
  return [space, &data, config, cache](const PathSpec& path) {
    if (auto it = cache->find(path); it != cache->end()) return it->second;
    std::vector<double> accs;
    for (std::size_t s = 0; s < config.scratch_seeds; ++s) {
      ScratchConfig sc = config.scratch;
      sc.seed = config.scratch.seed + s;
      accs.push_back(train_from_scratch(space, path, data, sc));
    }
    cache->emplace(path, accs);
    return accs;
  };
}

std::vector<PathSpec> rank_paths(const SpaceSpec& space, const RankConfig& config, std::uint64_t seed) {
  config.validate();
  const std::uint64_t count = space.path_count();
  if (count <= config.enumerate_cap) return enumerate(space, config.enumerate_cap);
  if (config.samples > count) throw InfeasibleError("cannot draw more distinct paths than the space holds");
  Rng rng = Rng::stream(seed, "rank.paths");
  std::set<PathSpec> chosen;
  while (chosen.size() < config.samples) chosen.insert(sample_uniform(space, rng));
  return {chosen.begin(), chosen.end()};
}

RankReport rank_supernet(const Supernet& net, const std::vector<PathSpec>& paths, const Dataset& data,
                         std::size_t eval_batch_size, const StandaloneFn& standalone) {
  if (paths.size() < 2) throw ShapeError("ranking needs at least two paths");
  RankReport report;
  report.paths = paths;
  for (const auto& p : paths) {
    report.supernet_accuracy.push_back(evaluate_accuracy(net, p, data.val, eval_batch_size));
    auto per_seed = standalone(p);
    if (per_seed.empty()) throw ShapeError("stand-alone oracle returned no accuracies for " + encode(p));
    if (report.standalone_per_seed.empty()) report.standalone_per_seed.resize(per_seed.size());
    if (per_seed.size() != report.standalone_per_seed.size()) {
      throw ShapeError("stand-alone oracle returned a varying number of seeds");
    }
    for (std::size_t s = 0; s < per_seed.size(); ++s) report.standalone_per_seed[s].push_back(per_seed[s]);
    report.standalone_accuracy.push_back(median(std::move(per_seed)));
  }
  double sum = 0;
  for (double a : report.supernet_accuracy) sum += a;
  report.mean_supernet_accuracy = sum / static_cast<double>(paths.size());
  report.tau = ranking_tau(report.supernet_accuracy, report.standalone_accuracy);
  for (const auto& accs : report.standalone_per_seed) {
    report.tau_per_seed.push_back(ranking_tau(report.supernet_accuracy, accs));
  }
  return report;
}

RankReport rank_experiment(const TrainConfig& train, const SpaceConfig& space, const Dataset& data,
                           const RankConfig& rank, StandaloneFn standalone) {
  rank.validate();
  auto spec = std::make_shared<const SpaceSpec>(build_space(space));
  if (!standalone) standalone = scratch_oracle(spec, data, rank);
  const auto paths = rank_paths(*spec, rank, train.seed);
  auto result = continue_search(init_state(train, spec, data), data);
  auto report = rank_supernet(result.state.net, paths, data, train.eval_batch_size, standalone);
  report.final_path = result.final_path;
  return report;
}

std::string to_string(AblationKnob knob) { return knob == AblationKnob::board_size ? "board.size" : "board.val_subset"; }

AblationKnob parse_knob(const std::string& text) {
  if (text == "board.size") return AblationKnob::board_size;
  if (text == "board.val_subset") return AblationKnob::val_subset;
  throw ConfigError("unknown knob '" + text + "' (expected board.size or board.val_subset)", "ablation.knob");
}

void AblationConfig::validate() const {
  if (grid.empty()) throw ConfigError("grid must list at least one value", "ablation.grid");
  if (seeds.empty()) throw ConfigError("at least one seed is required", "ablation.seeds");
  if (knob == AblationKnob::board_size) {
    for (auto v : grid) {
      if (v < 1) throw ConfigError("board sizes must be at least 1", "ablation.grid");
    }
  }
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::vector<AblationRow> ablation_driver(const TrainConfig& train, const SpaceConfig& space, const Dataset& data,
                                         const RankConfig& rank, const AblationConfig& ablation,
                                         StandaloneFn standalone) {
  ablation.validate();
  rank.validate();
  auto spec = std::make_shared<const SpaceSpec>(build_space(space));
  std::vector<AblationRow> rows(ablation.grid.size());
  for (std::size_t g = 0; g < ablation.grid.size(); ++g) rows[g].value = ablation.grid[g];

  if (ablation.knob == AblationKnob::board_size) {
    if (!standalone) standalone = scratch_oracle(spec, data, rank);
    for (std::size_t g = 0; g < ablation.grid.size(); ++g) {
      const auto start = std::chrono::steady_clock::now();
      for (auto seed : ablation.seeds) {
        TrainConfig cfg = train;
        cfg.board_size = ablation.grid[g];
        cfg.seed = seed;
        rows[g].taus.push_back(rank_experiment(cfg, space, data, rank, standalone).tau);
      }
      rows[g].seconds = seconds_since(start);
    }
  } else {
    for (auto v : ablation.grid) {
      if (v > data.val.size()) throw ConfigError("subset size exceeds the validation split", "ablation.grid");
    }
    for (auto seed : ablation.seeds) {
      TrainConfig cfg = train;
      cfg.seed = seed;
      const auto paths = rank_paths(*spec, rank, seed);
      auto result = continue_search(init_state(cfg, spec, data), data);
      const auto& net = result.state.net;
      std::vector<double> full;
      for (const auto& p : paths) full.push_back(evaluate_accuracy(net, p, data.val, cfg.eval_batch_size));
      for (std::size_t g = 0; g < ablation.grid.size(); ++g) {
        const auto start = std::chrono::steady_clock::now();
        const auto subset = make_val_subset(data.val, ablation.grid[g], seed);
        std::vector<double> accs;
        for (const auto& p : paths) accs.push_back(evaluate_accuracy(net, p, subset, cfg.eval_batch_size));
        rows[g].taus.push_back(ranking_tau(accs, full));
        rows[g].seconds += seconds_since(start);
      }
    }
  }
  for (auto& row : rows) row.tau = median(row.taus);
  return rows;
}

void write_ablation_csv(std::ostream& out, AblationKnob knob, const std::vector<AblationRow>& rows) {
  out << "knob,value,tau,taus,seconds\n";
  for (const auto& row : rows) {
    out << to_string(knob) << ',' << row.value << ',' << nlohmann::json(row.tau).dump() << ',';
    for (std::size_t i = 0; i < row.taus.size(); ++i) out << (i ? ";" : "") << nlohmann::json(row.taus[i]).dump();
    out << ',' << nlohmann::json(row.seconds).dump() << '\n';
  }
}

void write_rank_csv(std::ostream& out, const SpaceSpec& space, const RankReport& report) {
  out << "path,flops,supernet_acc,standalone_acc\n";
  for (std::size_t i = 0; i < report.paths.size(); ++i) {
    out << encode(report.paths[i]) << ',' << count_flops(space, report.paths[i]) << ','
        << nlohmann::json(report.supernet_accuracy[i]).dump() << ','
        << nlohmann::json(report.standalone_accuracy[i]).dump() << '\n';
  }
}

}  // namespace cream
