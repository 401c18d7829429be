/*
 * Copyright 2026 The MBNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "mbnet/graph.hpp"
#include "mbnet/optim.hpp"

namespace mbnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelGraph model;
  std::unique_ptr<Optimizer> optimizer;  // null when saved without one
  std::string config_text;               // resolved run configuration, may be empty
};

/// Binary layout (little-endian): "MBNETCKP", u32 version, model description
/// string, parameters and buffers as (name, tensor) lists, optional optimizer
/// state, resolved config text. Written to a temporary file then renamed.
void save_checkpoint(const std::filesystem::path& path, const ModelGraph& model, const Optimizer* optimizer,
                     const std::string& config_text);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mbnet
