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


// Python module `cream._core`: configs, spaces, search runs and rank statistics.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cream/config.hpp"

namespace py = pybind11;
using namespace cream;

namespace {

py::dict entry_dict(const BoardEntry& e) {
  py::dict d;
  d["path"] = encode(e.path);
  d["accuracy"] = e.accuracy;
  d["flops"] = e.flops;
  return d;
}

py::dict search(RunConfig config, std::optional<std::string> mode, std::optional<std::uint64_t> seed,
                std::optional<std::size_t> steps) {
  if (mode) {
    if (*mode != "cream" && *mode != "spos") throw ConfigError("expected cream or spos", "mode");
    config.train.mode = *mode == "cream" ? SearchMode::cream : SearchMode::spos;
  }
  if (seed) config.train.seed = *seed;
  if (steps) config.train.total_steps = *steps;
  validate_config(config);
  std::optional<SearchResult> found;
  {
    py::gil_scoped_release unlocked;
    const Dataset data = load_dataset(config);
    found.emplace(run_search(config.train, config.space, data));
  }
  const SearchResult& r = *found;
  py::dict out;
  out["path"] = encode(r.final_path);
  out["accuracy"] = r.final_accuracy;
  out["flops"] = r.final_flops;
  py::list board;
  for (const auto& e : r.board.entries()) board.append(entry_dict(e));
  out["board"] = board;
  out["metrics"] = r.metrics;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Prioritized-path one-shot architecture search engine";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NonFiniteError>(m, "NonFiniteError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<RunConfig>(m, "Config")
      .def_property_readonly("mode", [](const RunConfig& c) { return to_string(c.train.mode); })
      .def_property_readonly("seed", [](const RunConfig& c) { return c.train.seed; })
      .def_property_readonly("total_steps", [](const RunConfig& c) { return c.train.total_steps; })
      .def_property_readonly("board_size", [](const RunConfig& c) { return c.train.board_size; })
      .def("to_json", &serialize_config)
      .def("__eq__", [](const RunConfig& a, const RunConfig& b) { return a == b; });

  m.def("parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("text"));
  m.def("load_config", &load_config, py::arg("path"));

  py::class_<SpaceSpec>(m, "Space")
      .def_property_readonly("block_count", &SpaceSpec::block_count)
      .def_property_readonly("path_count", &SpaceSpec::path_count)
      .def("operators",
           [](const SpaceSpec& s, std::size_t block) {
             if (block >= s.blocks.size()) throw py::index_error("block out of range");
             std::vector<std::string> names;
             for (const auto& op : s.blocks[block].operators) names.push_back(op.name());
             return names;
           })
      .def("flops", [](const SpaceSpec& s, const std::string& path) { return count_flops(s, decode(path, s)); })
      .def("enumerate",
           [](const SpaceSpec& s, std::uint64_t cap) {
             std::vector<std::string> out;
             for (const auto& p : enumerate(s, cap)) out.push_back(encode(p));
             return out;
           },
           py::arg("cap") = 1000)
      .def("sample", [](const SpaceSpec& s, std::uint64_t seed) {
        Rng rng(seed);
        return encode(sample_uniform(s, rng));
      });

  m.def("space", [](const RunConfig& c) { return build_space(c.space); }, py::arg("config"));

  m.def("run_search", &search, py::arg("config"), py::arg("mode") = py::none(), py::arg("seed") = py::none(),
        py::arg("steps") = py::none(),
        "Run the search and return the final path, its accuracy and flops, the board and the metrics lines.");

  m.def(
      "train_from_scratch",
      [](const RunConfig& c, const std::string& path, std::optional<std::uint64_t> seed) {
        auto space = std::make_shared<const SpaceSpec>(build_space(c.space));
        ScratchConfig sc = c.rank.scratch;
        if (seed) sc.seed = *seed;
        const PathSpec p = decode(path, *space);
        py::gil_scoped_release unlocked;
        return train_from_scratch(space, p, load_dataset(c), sc);
      },
      py::arg("config"), py::arg("path"), py::arg("seed") = py::none());

  m.def("kendall_tau", [](const std::vector<double>& x, const std::vector<double>& y) { return kendall_tau(x, y); });
  m.def("ranking_tau", [](const std::vector<double>& x, const std::vector<double>& y) { return ranking_tau(x, y); });
}
