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

#include "cream/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cream {

using json = nlohmann::json;

namespace {

/// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError("expected an object", prefix_);
  }

  std::string field(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* child(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const json* v = child(key)) out = convert<T>(*v, field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key", field(it.key()));
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& name) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("expected true or false", name);
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("must be non-negative", name);
      if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer", name);
      const auto raw = v.get<std::uint64_t>();
      if (raw > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) throw ConfigError("out of range", name);
      return static_cast<T>(raw);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("expected a number", name);
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("expected a string", name);
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      return std::filesystem::path(convert<std::string>(v, name));
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

template <typename T>
std::vector<T> read_list(const json& v, const std::string& name) {
  if (!v.is_array()) throw ConfigError("expected a list", name);
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(Section::convert<T>(v[i], name + "[" + std::to_string(i) + "]"));
  return out;
}

SpaceConfig preset(const std::string& name) {
  if (name == "micro") return micro_space_config();
  if (name == "micro_extended") return micro_extended_space_config();
  if (name == "desk") return desk_space_config();
  if (name == "full") return full_space_config();
  throw ConfigError("unknown preset '" + name + "' (micro, micro_extended, desk, full)", "space.preset");
}

SpaceConfig read_space(const json& j) {
  Section s(j, "space");
  std::string name = "micro";
  s.get("preset", name);
  SpaceConfig c = preset(name);
  s.get("input_channels", c.input_channels);
  s.get("resolution", c.resolution);
  s.get("classes", c.classes);
  s.get("stem_channels", c.stem_channels);
  s.get("stem_stride", c.stem_stride);
  s.get("stem_separable", c.stem_separable);
  s.get("separable_stride", c.separable_stride);
  s.get("head_channels", c.head_channels);
  s.get("head_hidden", c.head_hidden);
  if (const json* stages = s.child("stages")) {
    if (!stages->is_array()) throw ConfigError("expected a list", "space.stages");
    c.stages.clear();
    for (std::size_t i = 0; i < stages->size(); ++i) {
      const std::string prefix = "space.stages[" + std::to_string(i) + "]";
      Section st((*stages)[i], prefix);
      StageConfig stage;
      st.get("channels", stage.channels);
      st.get("max_repeat", stage.max_repeat);
      st.get("stride", stage.stride);
      if (const json* ops = st.child("operators")) {
        for (const auto& text : read_list<std::string>(*ops, prefix + ".operators")) {
          try {
            stage.operators.push_back(OperatorSpec::parse(text));
          } catch (const Error& e) {
            throw ConfigError(e.what(), prefix + ".operators");
          }
        }
      }
      st.finish();
      c.stages.push_back(std::move(stage));
    }
  }
  s.finish();
  return c;
}

SearchMode parse_mode(const std::string& text, const std::string& field) {
  if (text == "cream") return SearchMode::cream;
  if (text == "spos") return SearchMode::spos;
  throw ConfigError("expected cream or spos, got '" + text + "'", field);
}

LrSchedule parse_schedule(const std::string& text, const std::string& field) {
  if (text == "linear") return LrSchedule::linear;
  if (text == "constant") return LrSchedule::constant;
  throw ConfigError("expected linear or constant, got '" + text + "'", field);
}

void read_train(const json& j, TrainConfig& t) {
  Section s(j, "train");
  std::string mode = to_string(t.mode), schedule = to_string(t.schedule);
  s.get("mode", mode);
  t.mode = parse_mode(mode, "train.mode");
  s.get("seed", t.seed);
  s.get("total_steps", t.total_steps);
  s.get("lr0", t.lr0);
  s.get("schedule", schedule);
  t.schedule = parse_schedule(schedule, "train.schedule");
  s.get("momentum", t.momentum);
  s.get("batch_size", t.batch_size);
  s.get("eval_batch_size", t.eval_batch_size);
  s.get("eval_interval", t.eval_interval);
  s.get("init_scale", t.init_scale);
  s.finish();
}

void read_board(const json& j, TrainConfig& t) {
  Section s(j, "board");
  s.get("size", t.board_size);
  s.get("flops_min", t.flops_min);
  s.get("flops_max", t.flops_max);
  s.get("val_subset", t.val_subset);
  s.get("max_tries", t.board_max_tries);
  s.finish();
}

void read_meta(const json& j, TrainConfig& t) {
  Section s(j, "meta");
  s.get("interval", t.meta_interval);
  s.get("lr", t.meta_lr);
  s.get("hidden", t.meta_hidden);
  s.get("init_scale", t.meta_init_scale);
  s.get("batch_size", t.meta_batch_size);
  if (const json* v = s.child("rho_override")) {
    if (v->is_null()) {
      t.rho_override.reset();
    } else {
      t.rho_override = Section::convert<double>(*v, "meta.rho_override");
    }
  }
  s.finish();
}

void read_dataset(const json& j, RunConfig& c, bool classes_set, bool resolution_set) {
  Section s(j, "dataset");
  const bool synthetic = s.has("synthetic");
  const bool idx = s.has("idx");
  if (synthetic == idx) throw ConfigError("exactly one of 'synthetic' or 'idx' is required", "dataset");
  if (synthetic) {
    Section d(*s.child("synthetic"), "dataset.synthetic");
    SyntheticSpec spec;
    spec.classes = c.space.classes;
    spec.resolution = c.space.resolution;
    d.get("classes", spec.classes);
    d.get("resolution", spec.resolution);
    d.get("n_train", spec.n_train);
    d.get("n_val", spec.n_val);
    d.get("noise", spec.noise);
    d.get("seed", spec.seed);
    d.get("period", spec.period);
    d.finish();
    // a dataset that only states its own shape also shapes the space
    if (!classes_set) c.space.classes = spec.classes;
    if (!resolution_set) c.space.resolution = spec.resolution;
    c.dataset = spec;
  } else {
    Section d(*s.child("idx"), "dataset.idx");
    IdxSource src;
    d.get("train_images", src.train_images);
    d.get("train_labels", src.train_labels);
    d.get("val_images", src.val_images);
    d.get("val_labels", src.val_labels);
    d.finish();
    c.dataset = src;
  }
  s.finish();
}

void read_output(const json& j, RunConfig& c) {
  Section s(j, "output");
  s.get("dir", c.output_dir);
  s.get("checkpoint_interval", c.checkpoint_interval);
  s.finish();
}

void read_scratch(const json& j, ScratchConfig& sc) {
  Section s(j, "scratch");
  std::string schedule = to_string(sc.schedule);
  s.get("seed", sc.seed);
  s.get("steps", sc.steps);
  s.get("lr0", sc.lr0);
  s.get("schedule", schedule);
  sc.schedule = parse_schedule(schedule, "scratch.schedule");
  s.get("batch_size", sc.batch_size);
  s.get("eval_batch_size", sc.eval_batch_size);
  s.get("init_scale", sc.init_scale);
  s.finish();
}

void read_rank(const json& j, RankConfig& r) {
  Section s(j, "rank");
  s.get("enumerate_cap", r.enumerate_cap);
  s.get("samples", r.samples);
  s.get("scratch_seeds", r.scratch_seeds);
  s.finish();
}

void read_ablation(const json& j, AblationConfig& a) {
  Section s(j, "ablation");
  std::string knob = to_string(a.knob);
  s.get("knob", knob);
  a.knob = parse_knob(knob);
  if (const json* g = s.child("grid")) a.grid = read_list<std::size_t>(*g, "ablation.grid");
  if (const json* g = s.child("seeds")) a.seeds = read_list<std::uint64_t>(*g, "ablation.seeds");
  s.finish();
}

std::string line_info(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

void validate_config(const RunConfig& c) {
  build_space(c.space);
  std::size_t val_size = std::numeric_limits<std::size_t>::max();
  if (const auto* syn = std::get_if<SyntheticSpec>(&c.dataset)) {
    if (syn->classes < 2) throw ConfigError("must be at least 2", "dataset.synthetic.classes");
    if (syn->resolution < 1) throw ConfigError("must be at least 1", "dataset.synthetic.resolution");
    if (syn->n_train < 1) throw ConfigError("must be at least 1", "dataset.synthetic.n_train");
    if (syn->n_val < 1) throw ConfigError("must be at least 1", "dataset.synthetic.n_val");
    if (!(syn->noise >= 0.0)) throw ConfigError("must be non-negative", "dataset.synthetic.noise");
    if (!(syn->period > 0.0)) throw ConfigError("must be positive", "dataset.synthetic.period");
    if (syn->classes != c.space.classes) throw ConfigError("differs from space.classes", "dataset.synthetic.classes");
    if (syn->resolution != c.space.resolution) {
      throw ConfigError("differs from space.resolution", "dataset.synthetic.resolution");
    }
    if (c.space.input_channels != 1) throw ConfigError("synthetic images have one channel", "space.input_channels");
    val_size = syn->n_val;
  } else {
    const auto& idx = std::get<IdxSource>(c.dataset);
    const std::pair<const char*, const std::filesystem::path*> files[] = {{"dataset.idx.train_images", &idx.train_images},
                                                                         {"dataset.idx.train_labels", &idx.train_labels},
                                                                         {"dataset.idx.val_images", &idx.val_images},
                                                                         {"dataset.idx.val_labels", &idx.val_labels}};
    for (const auto& [name, p] : files) {
      if (p->empty() || !std::filesystem::exists(*p)) throw ConfigError("file not found: '" + p->string() + "'", name);
    }
  }
  c.train.validate(val_size);
  c.rank.validate();
  c.ablation.validate();
  if (c.output_dir.empty()) throw ConfigError("must not be empty", "output.dir");
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON at " + line_info(text, e.byte) + ": " + e.what());
  }
  RunConfig c;
  Section top(j, "");
  bool classes_set = false, resolution_set = false;
  if (const json* v = top.child("space")) {
    c.space = read_space(*v);
    classes_set = v->contains("classes");
    resolution_set = v->contains("resolution");
  }
  if (const json* v = top.child("train")) read_train(*v, c.train);
  if (const json* v = top.child("board")) read_board(*v, c.train);
  if (const json* v = top.child("meta")) read_meta(*v, c.train);
  const json* ds = top.child("dataset");
  if (!ds) throw ConfigError("a dataset section is required", "dataset");
  read_dataset(*ds, c, classes_set, resolution_set);
  if (const json* v = top.child("output")) read_output(*v, c);
  if (const json* v = top.child("scratch")) read_scratch(*v, c.rank.scratch);
  if (const json* v = top.child("rank")) read_rank(*v, c.rank);
  if (const json* v = top.child("ablation")) read_ablation(*v, c.ablation);
  top.finish();
  validate_config(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'", "config");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string serialize_config(const RunConfig& c) {
  json space;
  space["input_channels"] = c.space.input_channels;
  space["resolution"] = c.space.resolution;
  space["classes"] = c.space.classes;
  space["stem_channels"] = c.space.stem_channels;
  space["stem_stride"] = c.space.stem_stride;
  space["stem_separable"] = c.space.stem_separable;
  space["separable_stride"] = c.space.separable_stride;
  space["head_channels"] = c.space.head_channels;
  space["head_hidden"] = c.space.head_hidden;
  json stages = json::array();
  for (const auto& st : c.space.stages) {
    json ops = json::array();
    for (const auto& op : st.operators) ops.push_back(op.name());
    stages.push_back({{"channels", st.channels}, {"max_repeat", st.max_repeat}, {"stride", st.stride}, {"operators", ops}});
  }
  space["stages"] = stages;

  const auto& t = c.train;
  json j;
  j["space"] = space;
  j["train"] = {{"mode", to_string(t.mode)},
                {"seed", t.seed},
                {"total_steps", t.total_steps},
                {"lr0", t.lr0},
                {"schedule", to_string(t.schedule)},
                {"momentum", t.momentum},
                {"batch_size", t.batch_size},
                {"eval_batch_size", t.eval_batch_size},
                {"eval_interval", t.eval_interval},
                {"init_scale", t.init_scale}};
  j["board"] = {{"size", t.board_size},
                {"flops_min", t.flops_min},
                {"flops_max", t.flops_max},
                {"val_subset", t.val_subset},
                {"max_tries", t.board_max_tries}};
  j["meta"] = {{"interval", t.meta_interval},
               {"lr", t.meta_lr},
               {"hidden", t.meta_hidden},
               {"init_scale", t.meta_init_scale},
               {"batch_size", t.meta_batch_size},
               {"rho_override", t.rho_override ? json(*t.rho_override) : json(nullptr)}};
  if (const auto* syn = std::get_if<SyntheticSpec>(&c.dataset)) {
    j["dataset"] = {{"synthetic",
                     {{"classes", syn->classes},
                      {"resolution", syn->resolution},
                      {"n_train", syn->n_train},
                      {"n_val", syn->n_val},
                      {"noise", syn->noise},
                      {"seed", syn->seed},
                      {"period", syn->period}}}};
  } else {
    const auto& idx = std::get<IdxSource>(c.dataset);
    j["dataset"] = {{"idx",
                     {{"train_images", idx.train_images.string()},
                      {"train_labels", idx.train_labels.string()},
                      {"val_images", idx.val_images.string()},
                      {"val_labels", idx.val_labels.string()}}}};
  }
  j["output"] = {{"dir", c.output_dir.string()}, {"checkpoint_interval", c.checkpoint_interval}};
  const auto& sc = c.rank.scratch;
  j["scratch"] = {{"seed", sc.seed},
                  {"steps", sc.steps},
                  {"lr0", sc.lr0},
                  {"schedule", to_string(sc.schedule)},
                  {"batch_size", sc.batch_size},
                  {"eval_batch_size", sc.eval_batch_size},
                  {"init_scale", sc.init_scale}};
  j["rank"] = {{"enumerate_cap", c.rank.enumerate_cap},
               {"samples", c.rank.samples},
               {"scratch_seeds", c.rank.scratch_seeds}};
  j["ablation"] = {{"knob", to_string(c.ablation.knob)}, {"grid", c.ablation.grid}, {"seeds", c.ablation.seeds}};
  return j.dump(2) + "\n";
}

Dataset load_dataset(const RunConfig& c) {
  if (const auto* syn = std::get_if<SyntheticSpec>(&c.dataset)) return gen_synthetic(*syn);
  const auto& idx = std::get<IdxSource>(c.dataset);
  Dataset d;
  d.train = load_idx(idx.train_images, idx.train_labels);
  d.val = load_idx(idx.val_images, idx.val_labels);
  if (d.train.images.rank() != 4 || d.val.images.rank() != 4) throw FormatError("IDX images must be 3-D");
  d.channels = d.train.images.dim(1);
  d.resolution = d.train.images.dim(2);
  if (d.val.images.dim(2) != d.resolution) throw FormatError("train and val IDX images differ in size");
  d.classes = c.space.classes;
  for (const auto* split : {&d.train, &d.val}) {
    for (int y : split->labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= d.classes) {
        throw ConfigError("IDX label " + std::to_string(y) + " outside [0, " + std::to_string(d.classes) + ")",
                          "space.classes");
      }
    }
  }
  return d;
}

}  // namespace cream
