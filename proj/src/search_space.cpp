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

#include "cream/search_space.hpp"

#include <algorithm>
#include <charconv>

namespace cream {

namespace {

bool one_of(int v, std::initializer_list<int> allowed) {
  return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
}

int parse_int(std::string_view s, std::string_view context) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw FormatError("bad integer '" + std::string(s) + "' in '" + std::string(context) + "'");
  }
  return v;
}

}  // namespace

void OperatorSpec::validate() const {
  switch (family) {
    case OpFamily::skip:
      if (kernel != 0 || expansion != 0) throw ConfigError("skip has no kernel or expansion", "operators");
      return;
    case OpFamily::mbconv:
      if (!one_of(kernel, {3, 5, 7})) throw ConfigError("mbconv kernel must be 3, 5 or 7", "operators");
      if (!one_of(expansion, {2, 4, 6})) throw ConfigError("mbconv expansion must be 2, 4 or 6", "operators");
      return;
    case OpFamily::resblock:
      if (kernel != 3 || expansion != 0) throw ConfigError("resblock kernel is fixed at 3", "operators");
      return;
    case OpFamily::conv2d:
      if (!one_of(kernel, {1, 3, 5}) || expansion != 0) {
        throw ConfigError("conv2d kernel must be 1, 3 or 5", "operators");
      }
      return;
  }
}

std::string OperatorSpec::name() const {
  switch (family) {
    case OpFamily::skip: return "skip";
    case OpFamily::mbconv: return "mbconv_k" + std::to_string(kernel) + "_e" + std::to_string(expansion);
    case OpFamily::resblock: return "resblock_k" + std::to_string(kernel);
    case OpFamily::conv2d: return "conv2d_k" + std::to_string(kernel);
  }
  return "?";
}

OperatorSpec OperatorSpec::parse(std::string_view text) {
  OperatorSpec op;
  auto rest_after = [&](std::string_view prefix) { return text.substr(prefix.size()); };
  if (text == "skip") {
    op = skip();
  } else if (text.starts_with("mbconv_k")) {
    auto rest = rest_after("mbconv_k");
    auto sep = rest.find("_e");
    if (sep == std::string_view::npos) throw FormatError("bad operator '" + std::string(text) + "'");
    op = mbconv(parse_int(rest.substr(0, sep), text), parse_int(rest.substr(sep + 2), text));
  } else if (text.starts_with("resblock_k")) {
    op = {OpFamily::resblock, parse_int(rest_after("resblock_k"), text), 0};
  } else if (text.starts_with("conv2d_k")) {
    op = conv(parse_int(rest_after("conv2d_k"), text));
  } else {
    throw FormatError("unknown operator '" + std::string(text) + "'");
  }
  op.validate();
  return op;
}

SpaceConfig micro_space_config() {
  SpaceConfig c;
  c.resolution = 16;
  c.classes = 4;
  c.stem_channels = 8;
  c.stem_stride = 2;
  c.head_channels = 16;
  const std::vector<OperatorSpec> ops{OperatorSpec::mbconv(3, 2), OperatorSpec::mbconv(5, 4), OperatorSpec::skip()};
  c.stages = {{8, 1, 1, ops}, {8, 1, 1, ops}, {8, 1, 1, ops}};
  return c;
}

SpaceConfig micro_extended_space_config() {
  SpaceConfig c = micro_space_config();
  const std::vector<OperatorSpec> ops{OperatorSpec::mbconv(3, 2), OperatorSpec::mbconv(5, 4), OperatorSpec::skip(),
                                      OperatorSpec::resblock(), OperatorSpec::conv(3)};
  for (auto& s : c.stages) s.operators = ops;
  return c;
}

SpaceConfig desk_space_config() {
  SpaceConfig c;
  c.resolution = 16;
  c.classes = 4;
  c.stem_channels = 4;
  c.stem_stride = 1;
  c.stem_separable = true;
  c.separable_stride = 1;
  std::vector<OperatorSpec> ops;
  for (int k : {3, 5}) {
    for (int e : {2, 4}) ops.push_back(OperatorSpec::mbconv(k, e));
  }
  ops.push_back(OperatorSpec::skip());
  c.stages = {{4, 2, 2, ops}, {6, 2, 2, ops}, {10, 2, 1, ops}, {12, 2, 2, ops}, {24, 1, 1, ops}};
  c.head_channels = 40;
  c.head_hidden = 0;
  return c;
}

std::vector<OperatorSpec> full_operators() {
  std::vector<OperatorSpec> ops;
  for (int k : {3, 5, 7}) {
    for (int e : {4, 6}) ops.push_back(OperatorSpec::mbconv(k, e));
  }
  ops.push_back(OperatorSpec::skip());
  return ops;
}

SpaceConfig full_space_config() {
  SpaceConfig c;
  c.input_channels = 3;
  c.resolution = 224;
  c.classes = 1000;
  c.stem_channels = 16;
  c.stem_stride = 2;
  c.stem_separable = true;
  c.separable_stride = 2;
  const auto ops = full_operators();
  c.stages = {{24, 6, 2, ops}, {40, 6, 2, ops}, {80, 6, 1, ops}, {96, 6, 2, ops}, {192, 6, 1, ops}};
  c.head_channels = 320;
  c.head_hidden = 1280;
  return c;
}

OperatorLayout operator_layout(const OperatorSpec& op, std::size_t in, std::size_t out, int stride) {
  OperatorLayout l;
  const bool same_shape = stride == 1 && in == out;
  switch (op.family) {
    case OpFamily::skip:
      if (!same_shape) throw ShapeError("skip cannot change the feature shape");
      break;
    case OpFamily::mbconv: {
      const std::size_t hidden = in * static_cast<std::size_t>(op.expansion);
      l.layers = {LayerSpec::conv(in, hidden, 1),     LayerSpec::relu(), LayerSpec::depthwise(hidden, op.kernel, stride),
                  LayerSpec::relu(), LayerSpec::conv(hidden, out, 1)};
      l.residual = same_shape;
      break;
    }
    case OpFamily::resblock: {
      // bottleneck: 1x1 reduce to out/4, 3x3, 1x1 expand
      const std::size_t mid = std::max<std::size_t>(1, out / 4);
      l.layers = {LayerSpec::conv(in, mid, 1),  LayerSpec::relu(), LayerSpec::conv(mid, mid, 3, stride),
                  LayerSpec::relu(), LayerSpec::conv(mid, out, 1)};
      l.residual = same_shape;
      break;
    }
    case OpFamily::conv2d:
      l.layers = {LayerSpec::conv(in, out, op.kernel, stride), LayerSpec::relu()};
      break;
  }
  return l;
}

std::uint64_t SpaceSpec::path_count() const noexcept {
  std::uint64_t total = 1;
  for (const auto& b : blocks) {
    const std::uint64_t n = b.operators.size();
    if (total > std::numeric_limits<std::uint64_t>::max() / n) return std::numeric_limits<std::uint64_t>::max();
    total *= n;
  }
  return total;
}

SpaceSpec build_space(const SpaceConfig& config) {
  auto require = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(what, field);
  };
  require(config.input_channels > 0, "space.input_channels", "must be positive");
  require(config.resolution > 0, "space.resolution", "must be positive");
  require(config.classes >= 2, "space.classes", "need at least 2 classes");
  require(config.stem_channels > 0, "space.stem_channels", "must be positive");
  require(config.stem_stride == 1 || config.stem_stride == 2, "space.stem_stride", "stride must be 1 or 2");
  require(config.separable_stride == 1 || config.separable_stride == 2, "space.separable_stride",
          "stride must be 1 or 2");
  require(config.head_channels > 0, "space.head_channels", "must be positive");

  SpaceSpec space;
  space.config = config;

  std::size_t extent = config.resolution;
  auto push = [&extent](std::vector<LayerSpec>& seq, LayerSpec l) {
    l.validate();
    if (l.kind == LayerKind::conv2d || l.kind == LayerKind::depthwise_conv2d) extent = l.output_extent(extent);
    seq.push_back(l);
  };
  push(space.stem, LayerSpec::conv(config.input_channels, config.stem_channels, 3, config.stem_stride));
  push(space.stem, LayerSpec::relu());
  if (config.stem_separable) {
    push(space.stem, LayerSpec::depthwise(config.stem_channels, 3, config.separable_stride));
    push(space.stem, LayerSpec::relu());
    push(space.stem, LayerSpec::conv(config.stem_channels, config.stem_channels, 1));
    push(space.stem, LayerSpec::relu());
  }
  space.stem_out_extent = extent;

  std::size_t channels = config.stem_channels;
  for (std::size_t s = 0; s < config.stages.size(); ++s) {
    const auto& stage = config.stages[s];
    const std::string field = "space.stages[" + std::to_string(s) + "]";
    require(stage.channels > 0, field.c_str(), "channels must be positive");
    require(stage.stride == 1 || stage.stride == 2, field.c_str(), "stride must be 1 or 2");
    require(stage.max_repeat >= 1, field.c_str(), "max_repeat must be >= 1");
    require(!stage.operators.empty(), field.c_str(), "operator list is empty");
    for (const auto& op : stage.operators) op.validate();
    const bool has_real_op =
        std::any_of(stage.operators.begin(), stage.operators.end(), [](const auto& op) { return !op.is_skip(); });
    require(has_real_op, field.c_str(), "needs at least one non-skip operator");

    for (int r = 0; r < stage.max_repeat; ++r) {
      ChoiceBlock b;
      b.stage = s;
      b.in_channels = channels;
      b.out_channels = stage.channels;
      b.stride = r == 0 ? stage.stride : 1;
      b.in_extent = extent;
      b.out_extent = LayerSpec::depthwise(1, 1, b.stride).output_extent(extent);
      for (const auto& op : stage.operators) {
        if (op.is_skip() && !b.shape_preserving()) continue;
        if (std::find(b.operators.begin(), b.operators.end(), op) != b.operators.end()) {
          throw ConfigError("duplicate operator " + op.name(), field);
        }
        b.operators.push_back(op);
        b.layouts.push_back(operator_layout(op, b.in_channels, b.out_channels, b.stride));
      }
      extent = b.out_extent;
      channels = stage.channels;
      space.blocks.push_back(std::move(b));
    }
  }

  space.head_in_extent = extent;
  push(space.head, LayerSpec::conv(channels, config.head_channels, 1));
  push(space.head, LayerSpec::relu());
  push(space.head, LayerSpec::global_avg_pool());
  std::size_t features = config.head_channels;
  if (config.head_hidden > 0) {
    push(space.head, LayerSpec::dense(features, config.head_hidden));
    push(space.head, LayerSpec::relu());
    features = config.head_hidden;
  }
  push(space.head, LayerSpec::dense(features, config.classes));
  return space;
}

void validate_path(const SpaceSpec& space, const PathSpec& path) {
  if (path.choices.size() != space.blocks.size()) {
    throw FormatError("path has " + std::to_string(path.choices.size()) + " choices, space has " +
                      std::to_string(space.blocks.size()) + " blocks");
  }
  for (std::size_t i = 0; i < path.choices.size(); ++i) {
    const int c = path.choices[i];
    if (c < 0 || static_cast<std::size_t>(c) >= space.blocks[i].operators.size()) {
      throw FormatError("choice " + std::to_string(c) + " out of range for block " + std::to_string(i) + " (" +
                        std::to_string(space.blocks[i].operators.size()) + " operators)");
    }
  }
}

std::string encode(const PathSpec& path) {
  std::string out;
  for (std::size_t i = 0; i < path.choices.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(path.choices[i]);
  }
  return out;
}

PathSpec decode(std::string_view text, const SpaceSpec& space) {
  PathSpec path;
  if (!text.empty()) {
    std::size_t start = 0;
    while (true) {
      const auto dash = text.find('-', start);
      path.choices.push_back(parse_int(text.substr(start, dash - start), text));
      if (dash == std::string_view::npos) break;
      start = dash + 1;
    }
  }
  validate_path(space, path);
  return path;
}

PathSpec sample_uniform(const SpaceSpec& space, Rng& rng) {
  PathSpec path;
  path.choices.reserve(space.blocks.size());
  for (const auto& b : space.blocks) path.choices.push_back(static_cast<int>(rng.uniform_int(b.operators.size())));
  return path;
}

PathSpec sample_in_flops_range(const SpaceSpec& space, Rng& rng, std::uint64_t min_flops, std::uint64_t max_flops,
                               std::size_t max_tries) {
  if (min_flops > max_flops) throw ConfigError("min flops exceeds max flops", "board.flops_min");
  for (std::size_t i = 0; i < max_tries; ++i) {
    PathSpec p = sample_uniform(space, rng);
    const auto f = count_flops(space, p);
    if (f >= min_flops && f <= max_flops) return p;
  }
  throw InfeasibleError("no path with flops in [" + std::to_string(min_flops) + ", " + std::to_string(max_flops) +
                        "] after " + std::to_string(max_tries) + " draws");
}

std::uint64_t layer_macs(const LayerSpec& layer, std::size_t in_extent) {
  const std::uint64_t out_extent = layer.output_extent(in_extent);
  const std::uint64_t k2 = static_cast<std::uint64_t>(layer.kernel) * layer.kernel;
  switch (layer.kind) {
    case LayerKind::conv2d: return out_extent * out_extent * layer.out_channels * layer.in_channels * k2;
    case LayerKind::depthwise_conv2d: return out_extent * out_extent * layer.out_channels * k2;
    case LayerKind::dense: return static_cast<std::uint64_t>(layer.in_channels) * layer.out_channels;
    default: return 0;
  }
}

namespace {

std::uint64_t sequence_macs(const std::vector<LayerSpec>& layers, std::size_t extent) {
  std::uint64_t total = 0;
  for (const auto& l : layers) {
    total += layer_macs(l, extent);
    if (l.kind == LayerKind::conv2d || l.kind == LayerKind::depthwise_conv2d) extent = l.output_extent(extent);
  }
  return total;
}

}  // namespace

std::uint64_t stem_flops(const SpaceSpec& space) { return sequence_macs(space.stem, space.config.resolution); }

std::uint64_t head_flops(const SpaceSpec& space) { return sequence_macs(space.head, space.head_in_extent); }

std::uint64_t block_flops(const SpaceSpec& space, std::size_t block, int choice) {
  const auto& b = space.blocks.at(block);
  return sequence_macs(b.layouts.at(static_cast<std::size_t>(choice)).layers, b.in_extent);
}

std::uint64_t count_flops(const SpaceSpec& space, const PathSpec& path) {
  validate_path(space, path);
  std::uint64_t total = stem_flops(space) + head_flops(space);
  for (std::size_t i = 0; i < path.choices.size(); ++i) total += block_flops(space, i, path.choices[i]);
  return total;
}

std::vector<PathSpec> enumerate(const SpaceSpec& space, std::uint64_t cap) {
  const auto total = space.path_count();
  if (total > cap) {
    throw InfeasibleError("space has " + std::to_string(total) + " paths, more than the cap of " + std::to_string(cap));
  }
  std::vector<PathSpec> out;
  out.reserve(total);
  PathSpec p;
  p.choices.assign(space.blocks.size(), 0);
  for (std::uint64_t n = 0; n < total; ++n) {
    out.push_back(p);
    // odometer increment, last block fastest
    for (std::size_t i = p.choices.size(); i-- > 0;) {
      if (static_cast<std::size_t>(++p.choices[i]) < space.blocks[i].operators.size()) break;
      p.choices[i] = 0;
    }
  }
  return out;
}

}  // namespace cream
