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

#include "cream/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace cream {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'M', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  std::uint32_t u32() {
    if (pos_ + 4 > end_) throw FormatError("checkpoint is truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string text(std::size_t n) {
    if (pos_ + n > end_) throw FormatError("checkpoint is truncated");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == end_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

// Word packing for the records.

void push_u64(std::vector<std::uint32_t>& w, std::uint64_t v) {
  w.push_back(static_cast<std::uint32_t>(v));
  w.push_back(static_cast<std::uint32_t>(v >> 32));
}

std::uint64_t pull_u64(const std::vector<std::uint32_t>& w, std::size_t i) {
  return static_cast<std::uint64_t>(w.at(2 * i)) | (static_cast<std::uint64_t>(w.at(2 * i + 1)) << 32);
}

CheckpointRecord u64_record(std::string name, const std::vector<std::uint64_t>& values) {
  CheckpointRecord r{std::move(name), {static_cast<std::uint32_t>(values.size()), 2}, {}};
  for (auto v : values) push_u64(r.words, v);
  return r;
}

CheckpointRecord f64_record(std::string name, const std::vector<double>& values) {
  std::vector<std::uint64_t> bits;
  for (double v : values) bits.push_back(std::bit_cast<std::uint64_t>(v));
  return u64_record(std::move(name), bits);
}

CheckpointRecord tensor_record(std::string name, const Tensor& t) {
  CheckpointRecord r{std::move(name), {}, {}};
  for (auto d : t.dims()) r.dims.push_back(static_cast<std::uint32_t>(d));
  r.words.reserve(t.size());
  for (float v : t.data()) r.words.push_back(std::bit_cast<std::uint32_t>(v));
  return r;
}

void add_store(std::vector<CheckpointRecord>& out, const std::string& prefix, const ParamStore& store) {
  for (const auto& [layer, params] : store) {
    for (const auto& [name, t] : params) out.push_back(tensor_record(prefix + "/" + layer + "/" + name, t));
  }
}

std::vector<std::uint64_t> read_u64s(const CheckpointRecord& r) {
  if (r.dims.size() != 2 || r.dims[1] != 2 || r.words.size() != 2 * static_cast<std::size_t>(r.dims[0])) {
    throw FormatError("record '" + r.name + "' is not a list of 64-bit values");
  }
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < r.dims[0]; ++i) out.push_back(pull_u64(r.words, i));
  return out;
}

std::vector<double> read_f64s(const CheckpointRecord& r) {
  std::vector<double> out;
  for (auto bits : read_u64s(r)) out.push_back(std::bit_cast<double>(bits));
  return out;
}

Tensor read_tensor(const CheckpointRecord& r) {
  Dims dims(r.dims.begin(), r.dims.end());
  if (dims_product(dims) != r.words.size()) throw FormatError("record '" + r.name + "' has a bad payload size");
  std::vector<float> values;
  values.reserve(r.words.size());
  for (auto w : r.words) values.push_back(std::bit_cast<float>(w));
  return Tensor(dims, std::move(values));
}

/// Overwrites `store` from records named prefix/layer/param. With `exact`, the
/// records must cover the same layers and shapes; otherwise they may name any
/// subset of `shape_source`.
void restore_store(const std::map<std::string, const CheckpointRecord*>& records, const std::string& prefix,
                   const ParamStore& shape_source, ParamStore& store, bool exact) {
  const std::string lead = prefix + "/";
  std::size_t found = 0;
  for (auto it = records.lower_bound(lead); it != records.end() && it->first.starts_with(lead); ++it) {
    const std::string rest = it->first.substr(lead.size());
    const auto slash = rest.rfind('/');
    if (slash == std::string::npos) throw FormatError("malformed record name '" + it->first + "'");
    const std::string layer = rest.substr(0, slash), name = rest.substr(slash + 1);
    auto lit = shape_source.find(layer);
    if (lit == shape_source.end() || !lit->second.count(name)) {
      throw ShapeError("checkpoint layer '" + layer + "/" + name + "' does not exist in the configured space");
    }
    Tensor t = read_tensor(*it->second);
    if (t.dims() != lit->second.at(name).dims()) {
      throw ShapeError("checkpoint layer '" + layer + "/" + name + "' has shape " + dims_string(t.dims()) +
                       ", the configured space expects " + dims_string(lit->second.at(name).dims()));
    }
    store[layer].insert_or_assign(name, std::move(t));
    ++found;
  }
  if (exact) {
    std::size_t expected = 0;
    for (const auto& [layer, params] : shape_source) expected += params.size();
    if (found != expected) {
      throw ShapeError("checkpoint holds " + std::to_string(found) + " " + prefix + " tensors, the configured space has " +
                       std::to_string(expected));
    }
  }
}

}  // namespace

std::vector<std::uint8_t> encode_records(const std::vector<CheckpointRecord>& records) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (dims_product(Dims(r.dims.begin(), r.dims.end())) != r.words.size()) {
      throw ShapeError("record '" + r.name + "' payload does not match its dims");
    }
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put_u32(out, static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) put_u32(out, d);
    for (auto w : r.words) put_u32(out, w);
  }
  put_u32(out, crc_of(out.data(), out.size()));
  return out;
}

std::vector<CheckpointRecord> decode_records(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  Reader in(bytes, body);
  in.text(4);
  const auto version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  if (crc_of(bytes.data(), body) != stored) throw FormatError("checkpoint checksum mismatch");
  const auto count = in.u32();
  std::vector<CheckpointRecord> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord r;
    r.name = in.text(in.u32());
    const auto rank = in.u32();
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      r.dims.push_back(in.u32());
      n *= r.dims.back();
    }
    if (n > body) throw FormatError("record '" + r.name + "' is larger than the file");
    r.words.reserve(n);
    for (std::size_t k = 0; k < n; ++k) r.words.push_back(in.u32());
    records.push_back(std::move(r));
  }
  if (!in.done()) throw FormatError("trailing bytes after the last checkpoint record");
  return records;
}

void save_checkpoint(const TrainState& st, const std::filesystem::path& path, std::uint64_t metrics_bytes) {
  if (st.pending) throw Error("cannot checkpoint between a train step and its meta update");
  std::vector<CheckpointRecord> records;
  records.push_back(u64_record("state/step", {st.step}));
  records.push_back(u64_record("state/metrics_bytes", {metrics_bytes}));
  const std::pair<const char*, const Rng*> rngs[] = {
      {"rng/sample", &st.sample_rng}, {"rng/board", &st.board_rng}, {"rng/data", &st.data_rng}, {"rng/meta", &st.meta_rng}};
  for (const auto& [name, rng] : rngs) {
    const auto s = rng->state();
    records.push_back(u64_record(name, {s.seed, s.draws}));
  }
  const auto& entries = st.board.entries();
  CheckpointRecord paths{"board/paths",
                         {static_cast<std::uint32_t>(entries.size()), static_cast<std::uint32_t>(st.space->block_count())},
                         {}};
  std::vector<double> accs;
  std::vector<std::uint64_t> flops;
  for (const auto& e : entries) {
    for (int c : e.path.choices) paths.words.push_back(static_cast<std::uint32_t>(c));
    accs.push_back(e.accuracy);
    flops.push_back(e.flops);
  }
  records.push_back(std::move(paths));
  records.push_back(f64_record("board/accuracy", accs));
  records.push_back(u64_record("board/flops", flops));
  records.push_back(u64_record("board/bounds", {st.board.flops_min(), st.board.flops_max()}));
  add_store(records, "weights", st.net.weights());
  add_store(records, "velocity", st.velocity);
  add_store(records, "meta", st.meta.params);

  const auto bytes = encode_records(records);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig& config,
                                 std::shared_ptr<const SpaceSpec> space, const Dataset& data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto records = decode_records(bytes);
  std::map<std::string, const CheckpointRecord*> by_name;
  for (const auto& r : records) {
    if (!by_name.emplace(r.name, &r).second) throw FormatError("duplicate checkpoint record '" + r.name + "'");
  }
  auto need = [&](const std::string& name) -> const CheckpointRecord& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint has no '" + name + "' record");
    return *it->second;
  };
  auto scalar = [&](const std::string& name) {
    const auto v = read_u64s(need(name));
    if (v.size() != 1) throw FormatError("record '" + name + "' must hold one value");
    return v[0];
  };

  TrainState st = init_state(config, space, data);
  LoadedCheckpoint out{std::move(st), scalar("state/metrics_bytes")};
  auto& s = out.state;
  s.step = scalar("state/step");
  if (s.step > config.total_steps) {
    throw FormatError("checkpoint step " + std::to_string(s.step) + " exceeds total_steps " +
                      std::to_string(config.total_steps));
  }
  const std::pair<const char*, Rng*> rngs[] = {
      {"rng/sample", &s.sample_rng}, {"rng/board", &s.board_rng}, {"rng/data", &s.data_rng}, {"rng/meta", &s.meta_rng}};
  for (const auto& [name, rng] : rngs) {
    const auto v = read_u64s(need(name));
    if (v.size() != 2) throw FormatError(std::string("record '") + name + "' must hold a seed and a draw count");
    *rng = Rng::restore({v[0], v[1]});
  }

  const auto& paths = need("board/paths");
  if (paths.dims.size() != 2 || paths.dims[1] != space->block_count()) {
    throw ShapeError("checkpoint board paths have " + std::to_string(paths.dims.size() == 2 ? paths.dims[1] : 0) +
                     " blocks, the configured space has " + std::to_string(space->block_count()));
  }
  const auto accs = read_f64s(need("board/accuracy"));
  const auto flops = read_u64s(need("board/flops"));
  const auto bounds = read_u64s(need("board/bounds"));
  if (accs.size() != paths.dims[0] || flops.size() != paths.dims[0] || bounds.size() != 2) {
    throw FormatError("checkpoint board records disagree in length");
  }
  std::vector<BoardEntry> entries;
  for (std::size_t k = 0; k < paths.dims[0]; ++k) {
    PathSpec p;
    for (std::size_t b = 0; b < paths.dims[1]; ++b) p.choices.push_back(static_cast<int>(paths.words[k * paths.dims[1] + b]));
    try {
      validate_path(*space, p);
    } catch (const Error& e) {
      throw ShapeError(std::string("checkpoint board path does not fit the configured space: ") + e.what());
    }
    if (count_flops(*space, p) != flops[k]) throw ShapeError("checkpoint board flops do not match the configured space");
    entries.push_back({std::move(p), accs[k], flops[k]});
  }
  s.board = Board(std::move(entries), bounds[0], bounds[1]);

  const ParamStore shapes = s.net.weights();
  restore_store(by_name, "weights", shapes, s.net.weights(), true);
  restore_store(by_name, "velocity", shapes, s.velocity, false);
  const ParamStore meta_shapes = s.meta.params;
  restore_store(by_name, "meta", meta_shapes, s.meta.params, true);
  return out;
}

}  // namespace cream
