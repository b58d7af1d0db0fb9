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

#include "cream/trainer.hpp"

#include <cmath>
#include <numeric>

#include "cream/metrics.hpp"

namespace cream {

std::string to_string(SearchMode mode) { return mode == SearchMode::cream ? "cream" : "spos"; }

std::string to_string(LrSchedule schedule) { return schedule == LrSchedule::linear ? "linear" : "constant"; }

void TrainConfig::validate(std::size_t val_size) const {
  if (total_steps < 1) throw ConfigError("must be at least 1", "train.total_steps");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("must be a positive finite number", "train.lr0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("must lie in [0, 1)", "train.momentum");
  if (batch_size < 1) throw ConfigError("must be at least 1", "train.batch_size");
  if (eval_batch_size < 1) throw ConfigError("must be at least 1", "train.eval_batch_size");
  if (eval_interval < 1) throw ConfigError("must be at least 1", "train.eval_interval");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ConfigError("must be non-negative", "train.init_scale");
  if (board_size < 1) throw ConfigError("must be at least 1", "board.size");
  if (flops_min > flops_max) throw ConfigError("flops_min exceeds flops_max", "board.flops_min");
  if (val_subset > val_size) {
    throw ConfigError("exceeds the validation split size " + std::to_string(val_size), "board.val_subset");
  }
  if (board_max_tries < 1) throw ConfigError("must be at least 1", "board.max_tries");
  if (meta_interval < 1) throw ConfigError("must be at least 1", "meta.interval");
  if (!(meta_lr >= 0.0) || !std::isfinite(meta_lr)) throw ConfigError("must be non-negative", "meta.lr");
  if (meta_hidden < 1) throw ConfigError("must be at least 1", "meta.hidden");
  if (!(meta_init_scale >= 0.0) || !std::isfinite(meta_init_scale)) {
    throw ConfigError("must be non-negative", "meta.init_scale");
  }
  if (rho_override && !(*rho_override >= 0.0 && std::isfinite(*rho_override))) {
    throw ConfigError("must be a non-negative finite number", "meta.rho_override");
  }
}

double lr_schedule(std::size_t t, std::size_t total, double lr0, LrSchedule schedule) {
  if (total == 0 || t > total) throw ConfigError("step " + std::to_string(t) + " outside [0, T]", "train.total_steps");
  if (schedule == LrSchedule::constant) return lr0;
  return lr0 * (1.0 - static_cast<double>(t) / static_cast<double>(total));
}

Split make_val_subset(const Split& val, std::size_t size, std::uint64_t seed) {
  if (size == 0 || size >= val.size()) return val;
  std::vector<std::size_t> order(val.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::stream(seed, "val_subset");
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  }
  order.resize(size);
  return gather(val, order);
}

TrainState init_state(const TrainConfig& config, std::shared_ptr<const SpaceSpec> space, const Dataset& data) {
  config.validate(data.val.size());
  const auto& sc = space->config;
  if (data.classes != sc.classes) {
    throw ConfigError("dataset has " + std::to_string(data.classes) + " classes, space expects " +
                          std::to_string(sc.classes),
                      "space.classes");
  }
  if (data.resolution != sc.resolution || data.channels != sc.input_channels) {
    throw ConfigError("dataset images do not match the space input shape", "space.resolution");
  }
  if (data.train.empty()) throw ConfigError("training split is empty", "dataset");

  Rng init_rng = Rng::stream(config.seed, "init");
  Rng meta_init_rng = Rng::stream(config.seed, "meta_init");
  Rng board_rng = Rng::stream(config.seed, "board");
  auto net = Supernet::init(space, init_rng, config.init_scale);
  auto board = Board::init(*space, config.board_size, config.flops_min, config.flops_max, board_rng,
                           config.board_max_tries);
  auto meta = MetaNet::init(sc.classes, config.meta_hidden, meta_init_rng, config.meta_init_scale);
  return TrainState{config,
                    space,
                    make_val_subset(data.val, config.val_subset, config.seed),
                    0,
                    std::move(net),
                    std::move(board),
                    std::move(meta),
                    Rng::stream(config.seed, "sample"),
                    board_rng,
                    Rng::stream(config.seed, "data"),
                    Rng::stream(config.seed, "meta"),
                    {},
                    std::nullopt};
}

Tensor combine_logit_grads(const Tensor& grad_ce, const Tensor& grad_kd, float weight) {
  if (grad_ce.dims() != grad_kd.dims()) throw ShapeError("logit gradients differ in shape");
  Tensor out = grad_ce;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += weight * grad_kd[i];
  return out;
}

namespace {

bool distillation_on(const TrainConfig& c) {
  return c.mode == SearchMode::cream && !(c.rho_override && *c.rho_override == 0.0);
}

void check_finite(double loss, const char* what, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw NonFiniteError(std::string("non-finite ") + what + " loss at step " + std::to_string(step));
  }
}

void apply_update(TrainState& st, const PathSpec& path, PathGrads grads, float lr) {
  const double mu = st.config.momentum;
  if (mu == 0.0) {
    st.net.apply_path_grads(path, grads, lr);
    return;
  }
  const float m = static_cast<float>(mu);
  for (auto& [key, g] : grads) {
    auto it = st.velocity.find(key);
    if (it == st.velocity.end()) {
      st.velocity.emplace(key, g);
      continue;
    }
    for (auto& [name, vel] : it->second) {
      const auto& gt = g.at(name);
      for (std::size_t i = 0; i < vel.size(); ++i) vel[i] = m * vel[i] + gt[i];
      g.at(name) = vel;
    }
  }
  st.net.apply_path_grads(path, grads, lr);
}

}  // namespace

bool meta_update_due(const TrainState& state, std::size_t step) {
  return state.config.mode == SearchMode::cream && !state.config.rho_override &&
         step % state.config.meta_interval == 0;
}

namespace {

StepReport run_step(TrainState& st, const Batch& batch) {
  const auto& cfg = st.config;
  if (st.step >= cfg.total_steps) throw Error("search already ran all " + std::to_string(cfg.total_steps) + " steps");
  st.pending.reset();

  StepReport r;
  r.step = st.step;
  r.path = sample_uniform(*st.space, st.sample_rng);
  r.flops = count_flops(*st.space, r.path);
  r.lr = lr_schedule(st.step, cfg.total_steps, cfg.lr0, cfg.schedule);

  auto fwd = st.net.forward_path(r.path, batch.images);
  auto ce = cross_entropy(fwd.logits, std::span<const int>(batch.labels));
  check_finite(ce.loss, "cross-entropy", st.step);
  r.loss_ce = ce.loss;

  Tensor grad_logits = ce.grad_logits;
  if (distillation_on(cfg)) {
    try {
      auto choice = select_teacher(st.meta, st.board, st.net, r.path, batch.images, fwd.logits);
      auto kd = soft_cross_entropy(fwd.logits, softmax(choice.teacher_logits));
      check_finite(kd.loss, "distillation", st.step);
      r.teacher = choice.score.teacher_index;
      r.loss_kd = kd.loss;
      r.rho = cfg.rho_override ? *cfg.rho_override : choice.score.rho;
      grad_logits = combine_logit_grads(ce.grad_logits, kd.grad_logits, static_cast<float>(r.rho));
      if (meta_update_due(st, st.step)) {
        // g_kd belongs to the pre-update weights, so it is taken before the SGD step
        st.pending = PendingMeta{st.step, r.path, std::move(choice.score),
                                 st.net.backward_path(r.path, fwd.cache, kd.grad_logits), r.lr};
      }
    } catch (const NoTeacherError&) {
      r.fallback = true;
    }
  }

  apply_update(st, r.path, st.net.backward_path(r.path, fwd.cache, grad_logits), static_cast<float>(r.lr));

  if (st.step % cfg.eval_interval == 0) {
    const double acc = evaluate_accuracy(st.net, r.path, st.val_subset, cfg.eval_batch_size);
    r.accuracy = acc;
    r.insert = st.board.try_insert({r.path, acc, r.flops});
  }
  ++st.step;
  return r;
}

}  // namespace

StepReport train_step(TrainState& st, const Batch& batch) {
  try {
    return run_step(st, batch);
  } catch (const NonFiniteError& e) {
    const std::string msg = e.what();
    if (msg.find(" at step ") != std::string::npos) throw;
    throw NonFiniteError(msg + " at step " + std::to_string(st.step));
  }
}

std::optional<MetaReport> maybe_meta_update(TrainState& st, const Batch& val_batch) {
  if (!st.pending) return std::nullopt;
  PendingMeta pm = std::move(*st.pending);
  st.pending.reset();

  auto fwd = st.net.forward_path(pm.student, val_batch.images);
  auto ce = cross_entropy(fwd.logits, std::span<const int>(val_batch.labels));
  check_finite(ce.loss, "validation", pm.step);
  const auto v = st.net.backward_path(pm.student, fwd.cache, ce.grad_logits);
  const auto grads = hypergradient(st.meta, pm.score, v, pm.g_kd, pm.eta);
  st.meta = meta_step(st.meta, grads, static_cast<float>(st.config.meta_lr));

  MetaReport r;
  r.step = pm.step;
  r.val_loss = ce.loss;
  r.scale = -pm.eta * flat_dot(v, pm.g_kd);
  r.rho = pm.score.rho;
  return r;
}

namespace {

Batch draw_batch(Rng& rng, const Split& split, std::size_t size) {
  std::vector<std::size_t> idx(size);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_int(split.size()));
  return gather(split, idx);
}

}  // namespace

Batch next_train_batch(TrainState& st, const Dataset& data) {
  return draw_batch(st.data_rng, data.train, st.config.batch_size);
}

Batch next_meta_batch(TrainState& st, const Dataset& data) {
  const std::size_t n = st.config.meta_batch_size ? st.config.meta_batch_size : st.config.batch_size;
  return draw_batch(st.meta_rng, data.val, n);
}

SearchResult continue_search(TrainState state, const Dataset& data, const SearchHooks& hooks) {
  std::vector<std::string> lines;
  auto emit = [&](std::string line) {
    if (hooks.on_metrics) hooks.on_metrics(line);
    lines.push_back(std::move(line));
  };
  const std::size_t total = state.config.total_steps;
  const std::size_t stop = hooks.stop_at ? std::min(*hooks.stop_at, total) : total;
  while (state.step < stop) {
    auto batch = next_train_batch(state, data);
    const auto report = train_step(state, batch);
    emit(step_record(report, state.board));
    if (state.pending) {
      auto val_batch = next_meta_batch(state, data);
      if (auto meta = maybe_meta_update(state, val_batch)) emit(meta_record(*meta));
    }
    if (hooks.after_step) hooks.after_step(state);
  }

  PathSpec final_path;
  double final_accuracy = 0.0;
  std::uint64_t final_flops = 0;
  if (state.step == total) {
    const auto sel = final_selection(state.board, state.net, data.val, state.config.eval_batch_size);
    final_path = sel.path;
    final_accuracy = sel.accuracy;
    final_flops = state.board.entries()[sel.index].flops;
    emit(final_record(final_path, final_accuracy, final_flops));
  }
  Board board = state.board;
  return SearchResult{std::move(final_path), final_accuracy, final_flops, std::move(board), std::move(lines),
                      std::move(state)};
}

SearchResult run_search(const TrainConfig& config, const SpaceConfig& space, const Dataset& data,
                        const SearchHooks& hooks) {
  auto spec = std::make_shared<const SpaceSpec>(build_space(space));
  return continue_search(init_state(config, std::move(spec), data), data, hooks);
}

}  // namespace cream
