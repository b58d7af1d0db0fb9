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

#include "cream/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "cream/error.hpp"
#include "cream/rng.hpp"

namespace cream {

std::vector<float> bar_pattern(std::size_t resolution, double angle, double phase, double contrast, double period) {
  std::vector<float> px(resolution * resolution);
  const double c = std::cos(angle), s = std::sin(angle);
  const double mid = (static_cast<double>(resolution) - 1.0) / 2.0;
  const double freq = 2.0 * std::numbers::pi / period;
  for (std::size_t i = 0; i < resolution; ++i) {
    for (std::size_t j = 0; j < resolution; ++j) {
      const double u = static_cast<double>(j) - mid, v = static_cast<double>(i) - mid;
      const double d = u * c + v * s;
      px[i * resolution + j] = static_cast<float>(0.5 + 0.5 * contrast * std::cos(freq * d + phase));
    }
  }
  return px;
}

namespace {

Split make_split(const SyntheticSpec& spec, std::size_t n, Rng& rng) {
  const std::size_t plane = spec.resolution * spec.resolution;
  Split out;
  out.images = Tensor({n, 1, spec.resolution, spec.resolution});
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % spec.classes);
    const double angle = label * std::numbers::pi / static_cast<double>(spec.classes);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double contrast = rng.uniform(0.6, 1.0);
    const auto px = bar_pattern(spec.resolution, angle, phase, contrast, spec.period);
    float* dst = out.images.raw() + i * plane;
    for (std::size_t k = 0; k < plane; ++k) {
      const double noise = spec.noise > 0.0 ? spec.noise * rng.normal() : 0.0;
      dst[k] = static_cast<float>(px[k] + noise);
    }
    out.labels[i] = label;
  }
  return out;
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated IDX header in " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::vector<unsigned char> read_payload(std::istream& in, std::size_t count, const std::filesystem::path& path) {
  std::vector<unsigned char> buf(count);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count))) {
    throw FormatError("truncated IDX payload in " + path.string());
  }
  return buf;
}

}  // namespace

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ConfigError("need at least 2 classes", "dataset.synthetic.classes");
  if (spec.resolution == 0) throw ConfigError("must be positive", "dataset.synthetic.resolution");
  if (spec.n_train == 0 || spec.n_val == 0) throw ConfigError("splits must be non-empty", "dataset.synthetic");
  if (spec.noise < 0.0) throw ConfigError("must be non-negative", "dataset.synthetic.noise");
  Rng train_rng = Rng::stream(spec.seed, "data.train");
  Rng val_rng = Rng::stream(spec.seed, "data.val");
  Dataset d;
  d.classes = spec.classes;
  d.channels = 1;
  d.resolution = spec.resolution;
  d.train = make_split(spec, spec.n_train, train_rng);
  d.val = make_split(spec, spec.n_val, val_rng);
  return d;
}

Split load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path.string());

  const auto img_magic = read_be32(img, images_path);
  if (img_magic != 0x00000803) throw FormatError("bad IDX image magic in " + images_path.string());
  const auto n_img = read_be32(img, images_path);
  const auto rows = read_be32(img, images_path);
  const auto cols = read_be32(img, images_path);
  const auto lab_magic = read_be32(lab, labels_path);
  if (lab_magic != 0x00000801) throw FormatError("bad IDX label magic in " + labels_path.string());
  const auto n_lab = read_be32(lab, labels_path);
  if (n_img != n_lab) {
    throw FormatError("IDX count mismatch: " + std::to_string(n_img) + " images, " + std::to_string(n_lab) +
                      " labels");
  }
  if (n_img == 0 || rows == 0 || rows != cols) throw FormatError("IDX images must be non-empty and square");

  const std::size_t plane = std::size_t{rows} * cols;
  const auto pixels = read_payload(img, std::size_t{n_img} * plane, images_path);
  const auto labels = read_payload(lab, n_lab, labels_path);
  Split out;
  out.images = Tensor({n_img, 1, rows, cols});
  for (std::size_t i = 0; i < pixels.size(); ++i) out.images[i] = static_cast<float>(pixels[i]) / 255.0f;
  out.labels.assign(labels.begin(), labels.end());
  return out;
}

Batch gather(const Split& split, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("cannot gather an empty batch");
  Dims dims = split.images.dims();
  const std::size_t row = dims_product(dims) / dims[0];
  dims[0] = indices.size();
  Batch b;
  b.images = Tensor(dims);
  b.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= split.size()) throw ShapeError("batch index out of range");
    std::copy_n(split.images.raw() + src * row, row, b.images.raw() + i * row);
    b.labels.push_back(split.labels[src]);
  }
  return b;
}

Split take_prefix(const Split& split, std::size_t count) {
  if (count >= split.size()) return split;
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  return gather(split, idx);
}

}  // namespace cream
