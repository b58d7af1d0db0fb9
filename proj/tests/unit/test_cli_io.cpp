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


#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

#include "cream/checkpoint.hpp"
#include "cream/config.hpp"
#include "cream/metrics.hpp"

using namespace cream;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cream_test_" + std::to_string(Rng(reinterpret_cast<std::uintptr_t>(this)).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

const char* kMinimal = R"({"space": {"preset": "micro"}, "dataset": {"synthetic": {"seed": 3}}})";

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

void write_idx(const fs::path& images, const fs::path& labels, std::uint32_t image_magic, std::uint32_t n_images,
               std::uint32_t n_labels, std::uint32_t side) {
  std::ofstream img(images, std::ios::binary), lab(labels, std::ios::binary);
  write_be32(img, image_magic);
  write_be32(img, n_images);
  write_be32(img, side);
  write_be32(img, side);
  for (std::uint32_t i = 0; i < n_images * side * side; ++i) img.put(static_cast<char>(i % 2 ? 255 : 0));
  write_be32(lab, 0x00000801);
  write_be32(lab, n_labels);
  for (std::uint32_t i = 0; i < n_labels; ++i) lab.put(static_cast<char>(i % 3));
}

TrainConfig tiny_train(std::size_t steps) {
  TrainConfig c;
  c.total_steps = steps;
  c.board_size = 3;
  c.val_subset = 64;
  c.batch_size = 8;
  c.meta_interval = 3;
  c.meta_hidden = 8;
  c.momentum = 0.9;  // exercises the velocity records
  return c;
}

const Dataset& data() {
  static const Dataset d = gen_synthetic(SyntheticSpec{});
  return d;
}

std::shared_ptr<const SpaceSpec> micro() { return std::make_shared<const SpaceSpec>(build_space(micro_space_config())); }

}  // namespace

TEST_CASE("a minimal config takes every default") {
  const auto c = parse_config(kMinimal);
  RunConfig expected;
  expected.dataset = SyntheticSpec{.seed = 3};
  CHECK(c == expected);
  CHECK(c.train.board_size == 10);
  CHECK(c.train.meta_interval == 20);
  CHECK(c.space == micro_space_config());
}

TEST_CASE("explicit values survive defaults") {
  const auto c = parse_config(R"({"dataset": {"synthetic": {}}, "train": {"lr0": 0.25, "total_steps": 7}, "board": {"size": 2}})");
  CHECK(c.train.lr0 == 0.25);
  CHECK(c.train.total_steps == 7);
  CHECK(c.train.board_size == 2);
}

TEST_CASE("config errors name the field") {
  CHECK(field_of([] { validate_config(parse_config(R"({"dataset": {"synthetic": {}}, "board": {"size": 0}})")); }) == "board.size");
  CHECK(field_of([] { parse_config(R"({"dataset": {"synthetic": {}}, "board": {"sise": 3}})"); }) == "board.sise");
  CHECK(field_of([] { parse_config(R"({"dataset": {"synthetic": {}}, "colour": 1})"); }) == "colour");
  CHECK(field_of([] { parse_config(R"({"dataset": {"synthetic": {}}, "train": {"lr0": "fast"}})"); }) == "train.lr0");
  try {
    parse_config("{\n  \"train\": {\n    \"lr0\": ,\n  }\n}", "bad.json");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.json") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
  }
}

TEST_CASE("config round trip") {
  TempDir dir;
  write_idx(dir.path / "ti", dir.path / "tl", 0x00000803, 4, 4, 16);
  write_idx(dir.path / "vi", dir.path / "vl", 0x00000803, 4, 4, 16);
  nlohmann::json idx = {{"dataset",
                         {{"idx",
                           {{"train_images", (dir.path / "ti").string()},
                            {"train_labels", (dir.path / "tl").string()},
                            {"val_images", (dir.path / "vi").string()},
                            {"val_labels", (dir.path / "vl").string()}}}}},
                        {"output", {{"dir", "x/y"}}}};
  const std::string idx_text = idx.dump();
  for (const std::string text : {std::string(kMinimal), std::string(R"({"dataset": {"synthetic": {"noise": 0.1}},
        "space": {"preset": "micro_extended"}, "train": {"mode": "spos", "seed": 9},
        "meta": {"rho_override": 0.0}, "board": {"flops_min": 100, "flops_max": 999999},
        "ablation": {"knob": "board.val_subset", "grid": [32, 0], "seeds": [1, 2]}})"),
                                 idx_text}) {
    const auto c = parse_config(text);
    const auto again = parse_config(serialize_config(c));
    CHECK(again == c);
    CHECK(serialize_config(again) == serialize_config(c));
  }
}

TEST_CASE("shipped configs load and validate") {
  for (const char* name : {"micro.json", "micro_extended.json", "desk.json"}) {
    CAPTURE(name);
    const auto c = load_config(fs::path(CREAM_SOURCE_DIR) / "configs" / name);
    CHECK_NOTHROW(validate_config(c));
  }
}

TEST_CASE("noiseless synthetic data is separable by template fitting") {
  SyntheticSpec s;
  s.noise = 0.0;
  s.n_train = 8;
  s.n_val = 200;
  const auto d = gen_synthetic(s);
  const std::size_t r = s.resolution;
  const double pi = std::acos(-1.0), mid = (r - 1) / 2.0;
  // each class spans {cos, sin} of its oriented bar frequency; fit by least squares
  auto residual = [&](const float* x, int cls) {
    const double a = cls * pi / s.classes, f = 2 * pi / s.period;
    double cc = 0, ss = 0, cs = 0, xc = 0, xs = 0, xx = 0;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        const double t = f * ((j - mid) * std::cos(a) + (i - mid) * std::sin(a));
        const double c = std::cos(t), sn = std::sin(t), v = x[i * r + j] - 0.5;
        cc += c * c, ss += sn * sn, cs += c * sn, xc += v * c, xs += v * sn, xx += v * v;
      }
    const double det = cc * ss - cs * cs;
    const double p = (xc * ss - xs * cs) / det, q = (xs * cc - xc * cs) / det;
    return xx - (p * xc + q * xs);
  };
  std::size_t ok = 0;
  for (std::size_t n = 0; n < d.val.size(); ++n) {
    const float* x = d.val.images.raw() + n * r * r;
    int best = 0;
    for (int c = 1; c < static_cast<int>(s.classes); ++c) {
      if (residual(x, c) < residual(x, best)) best = c;
    }
    ok += best == d.val.labels[n];
  }
  CHECK(ok == d.val.size());
}

TEST_CASE("synthetic data is balanced and seeded") {
  SyntheticSpec s;
  s.n_train = 100;
  const auto a = gen_synthetic(s), b = gen_synthetic(s);
  CHECK(a.train.images == b.train.images);
  CHECK(a.val.labels == b.val.labels);
  std::vector<int> hist(4);
  for (int l : a.val.labels) hist[l]++;
  CHECK(hist == std::vector<int>(4, 128));
  s.seed = 1;
  CHECK_FALSE(gen_synthetic(s).train.images == a.train.images);
}

TEST_CASE("IDX loading") {
  TempDir dir;
  const auto img = dir.path / "img", lab = dir.path / "lab";
  write_idx(img, lab, 0x00000803, 10, 10, 4);
  const auto split = load_idx(img, lab);
  CHECK(split.size() == 10);
  CHECK(split.images.dims() == Dims{10, 1, 4, 4});
  CHECK(split.images[0] == 0.0f);
  CHECK(split.images[1] == 1.0f);
  CHECK(split.labels[4] == 1);

  write_idx(img, lab, 0x00000802, 10, 10, 4);
  CHECK_THROWS_AS(load_idx(img, lab), FormatError);
  write_idx(img, lab, 0x00000803, 10, 9, 4);
  CHECK_THROWS_AS(load_idx(img, lab), FormatError);
  CHECK_THROWS_AS(load_idx(dir.path / "missing", lab), IoError);
}

TEST_CASE("checkpoint round trip is lossless") {
  TempDir dir;
  SearchHooks hooks;
  hooks.stop_at = 7;
  const auto part = continue_search(init_state(tiny_train(20), micro(), data()), data(), hooks);
  const auto& st = part.state;
  save_checkpoint(st, dir.path / "a.crm", 1234);
  const auto loaded = load_checkpoint(dir.path / "a.crm", st.config, micro(), data());
  CHECK(loaded.metrics_bytes == 1234);
  const auto& ld = loaded.state;
  CHECK(ld.step == 7);
  CHECK(ld.net.weights() == st.net.weights());
  CHECK(ld.velocity == st.velocity);
  CHECK(ld.meta == st.meta);
  CHECK(ld.board.entries() == st.board.entries());
  CHECK(ld.sample_rng.state() == st.sample_rng.state());
  CHECK(ld.board_rng.state() == st.board_rng.state());
  CHECK(ld.data_rng.state() == st.data_rng.state());
  CHECK(ld.meta_rng.state() == st.meta_rng.state());

  // saving the restored state reproduces the file byte for byte
  save_checkpoint(ld, dir.path / "b.crm", 1234);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(bytes(dir.path / "a.crm") == bytes(dir.path / "b.crm"));
  CHECK_FALSE(fs::exists(dir.path / "a.crm.tmp"));
}

TEST_CASE("resuming reproduces the uninterrupted run") {
  TempDir dir;
  const auto cfg = tiny_train(10);
  const auto whole = continue_search(init_state(cfg, micro(), data()), data());
  for (std::size_t cut : {1, 3, 4, 9}) {
    CAPTURE(cut);
    SearchHooks hooks;
    hooks.stop_at = cut;
    const auto first = continue_search(init_state(cfg, micro(), data()), data(), hooks);
    save_checkpoint(first.state, dir.path / "c.crm");
    auto resumed = load_checkpoint(dir.path / "c.crm", cfg, micro(), data());
    const auto rest = continue_search(std::move(resumed.state), data());
    auto lines = first.metrics;
    lines.insert(lines.end(), rest.metrics.begin(), rest.metrics.end());
    CHECK(lines == whole.metrics);
    CHECK(rest.state.net.weights() == whole.state.net.weights());
  }
}

TEST_CASE("damaged or mismatched checkpoints are rejected") {
  TempDir dir;
  SearchHooks hooks;
  hooks.stop_at = 2;
  const auto cfg = tiny_train(10);
  const auto part = continue_search(init_state(cfg, micro(), data()), data(), hooks);
  const auto file = dir.path / "d.crm";
  save_checkpoint(part.state, file);

  std::vector<char> raw;
  {
    std::ifstream in(file, std::ios::binary);
    raw.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write_raw = [&](const std::vector<char>& b) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  auto flipped = raw;
  flipped[raw.size() / 2] ^= 0x10;
  write_raw(flipped);
  try {
    load_checkpoint(file, cfg, micro(), data());
    FAIL("expected a checksum error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("checksum") != std::string::npos);
  }
  write_raw(std::vector<char>(raw.begin(), raw.begin() + 40));
  CHECK_THROWS_AS(load_checkpoint(file, cfg, micro(), data()), FormatError);
  auto magic = raw;
  magic[0] = 'X';
  write_raw(magic);
  CHECK_THROWS_AS(load_checkpoint(file, cfg, micro(), data()), FormatError);

  write_raw(raw);
  auto wider = micro_space_config();
  wider.stem_channels = 6;
  CHECK_THROWS_AS(load_checkpoint(file, cfg, std::make_shared<const SpaceSpec>(build_space(wider)), data()),
                  ShapeError);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "none.crm", cfg, micro(), data()), IoError);
}

TEST_CASE("record encoding") {
  const std::vector<CheckpointRecord> recs{{"a", {2}, {1, 2}}, {"bb/c", {1, 1, 1}, {7}}};
  const auto bytes = encode_records(recs);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CRM1");
  CHECK(decode_records(bytes) == recs);
}

TEST_CASE("metrics log") {
  TempDir dir;
  const auto log = dir.path / "m.jsonl";
  auto cfg = tiny_train(12);
  cfg.eval_interval = 2;
  const auto r = continue_search(init_state(cfg, micro(), data()), data());
  std::uint64_t prefix = 0;
  {
    MetricsWriter w(log);
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
      w.write(r.metrics[i]);
      if (i == 4) prefix = w.bytes_written();
    }
  }
  const auto lines = read_lines(log);
  CHECK(lines == r.metrics);
  std::size_t evaluated = 0;
  for (const auto& line : lines) {
    const auto j = nlohmann::json::parse(line);
    if (j["event"] == "step" && !j["acc"].is_null()) ++evaluated;
  }
  CHECK(evaluated == 6);
  const auto rows = plot_rows(lines);
  CHECK(rows.size() == evaluated);
  emit_plot_data(rows, dir.path / "plot.csv");
  const auto csv = read_lines(dir.path / "plot.csv");
  CHECK(csv.front() == "path,flops,accuracy");
  CHECK(csv.size() == evaluated + 1);

  // reopening with a kept prefix drops only the tail
  {
    MetricsWriter w(log, prefix);
    CHECK(w.bytes_written() == prefix);
  }
  const auto kept = read_lines(log);
  CHECK(kept == std::vector<std::string>(r.metrics.begin(), r.metrics.begin() + 5));
}
