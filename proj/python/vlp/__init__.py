# Copyright 2026 The VLP Toy Planner Authors
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

"""Toy language-supervised planner: Python bindings of the C++ core."""

from ._core import (
    RESULT_SCHEMA_VERSION,
    SCENE_SCHEMA_VERSION,
    ArgumentError,
    BackendError,
    ConfigError,
    DegenerateError,
    Error,
    ExperimentConfig,
    PairingError,
    ProtocolError,
    SchemaError,
    encode,
    l2_error,
    make_scenes,
    report,
    run_one,
    scene_prompts,
    symmetric_ce_loss,
    validate_result,
    world_config,
    write_embedding_store,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
