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

// Run configuration: a flat key-value document with dotted keys, e.g.
//
//   model.name = mbinception
//   model.n = 8
//   data.name = mnist
//   data.dir = data/mnist
//   train.seed = 1
//
// '#' starts a comment. Later assignments override earlier ones, which is
// how command-line overrides are layered on top of a file.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "mbnet/data.hpp"
#include "mbnet/models.hpp"
#include "mbnet/optim.hpp"

namespace mbnet {

using KeyValues = std::map<std::string, std::string>;

/// Parses "key = value" lines. Malformed lines are usage errors.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);
/// Parses a single "key=value" override.
std::pair<std::string, std::string> parse_assignment(const std::string& text);

struct RunConfig {
  ModelSpec model;

  std::string dataset = "mnist";
  std::filesystem::path data_dir;              // defaults to data/<dataset>
  std::size_t train_limit = 10000;       // 0 keeps the whole training split
  std::size_t validation_limit = 2000;   // 0 keeps the whole validation split
  std::size_t test_limit = 2000;         // 0 keeps the whole test split
  double validation_fraction = 0.10;
  data::ResizeMethod resize = data::ResizeMethod::pad;

  std::string optimizer = "nadam";
  NadamHyper nadam{.eta = 0.015};  // tuned for mbinception on 10k MNIST, 3 epochs
  std::string schedule = "cosine";  // lr * (1 + cos(pi * step / steps)) / 2, or constant

  std::size_t batch_size = 16;
  std::size_t epochs = 3;
  std::uint64_t seed = 0;

  std::filesystem::path output_dir = "runs";
  std::size_t histogram_bins = 20;
  data::Split eval_split = data::Split::test;
};

/// Builds a RunConfig from key-values. Unknown keys, unparsable values and a
/// missing train.seed are usage errors.
RunConfig resolve_config(const KeyValues& values);

/// Every key with its resolved value, one "key = value" line each, sorted.
std::string canonical_text(const RunConfig& config);

/// 64-bit FNV-1a of the canonical text without output.dir, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Independent streams derived from the run seed.
enum class SeedStream : std::uint64_t { init = 1, split = 2, shuffle = 3, dropout = 4 };
std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream);

}  // namespace mbnet
