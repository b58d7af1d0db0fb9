# Copyright 2026 The Cream NAS Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python front end for the prioritized-path architecture search engine."""

from ._core import (
    Config,
    ConfigError,
    Error,
    FormatError,
    InfeasibleError,
    IoError,
    NonFiniteError,
    ShapeError,
    Space,
    kendall_tau,
    load_config,
    parse_config,
    ranking_tau,
    run_search,
    space,
    train_from_scratch,
)

__all__ = [
    "Config",
    "ConfigError",
    "Error",
    "FormatError",
    "InfeasibleError",
    "IoError",
    "NonFiniteError",
    "ShapeError",
    "Space",
    "kendall_tau",
    "load_config",
    "parse_config",
    "ranking_tau",
    "run_search",
    "space",
    "train_from_scratch",
]
