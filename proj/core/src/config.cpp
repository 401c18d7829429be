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

#include "mbnet/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mbnet/metrics.hpp"

namespace mbnet {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    fail(ErrorKind::usage, "config key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return v;
}

double to_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    fail(ErrorKind::usage, "config key '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::istringstream is(value);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(to_u64(key, trim(item)));
  if (out.empty()) fail(ErrorKind::usage, "config key '" + key + "': empty list");
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::usage, "config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorKind::usage, "config line " + std::to_string(line_no) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::usage, "cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::pair<std::string, std::string> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || trim(text.substr(0, eq)).empty()) {
    fail(ErrorKind::usage, "override '" + text + "' is not of the form key=value");
  }
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

RunConfig resolve_config(const KeyValues& values) {
  RunConfig c;
  bool have_seed = false;
  for (const auto& [key, value] : values) {
    if (key == "model.name") {
      c.model.name = value;
    } else if (key == "model.n") {
      c.model.base_filters = to_u64(key, value);
    } else if (key == "model.stages") {
      c.model.stage_multipliers = to_list(key, value);
    } else if (key == "model.block_dropout") {
      c.model.block_dropout = to_real(key, value);
    } else if (key == "model.head_dropout") {
      c.model.head_dropout = to_real(key, value);
    } else if (key == "model.width") {
      c.model.width = to_u64(key, value);
    } else if (key == "model.depth") {
      c.model.depth = to_u64(key, value);
    } else if (key == "data.name") {
      c.dataset = value;
    } else if (key == "data.dir") {
      c.data_dir = value;
    } else if (key == "data.train_limit") {
      c.train_limit = to_u64(key, value);
    } else if (key == "data.validation_limit") {
      c.validation_limit = to_u64(key, value);
    } else if (key == "data.test_limit") {
      c.test_limit = to_u64(key, value);
    } else if (key == "data.validation_fraction") {
      c.validation_fraction = to_real(key, value);
    } else if (key == "data.resize") {
      if (value != "pad" && value != "bilinear") {
        fail(ErrorKind::usage, "config key 'data.resize': expected pad or bilinear, got '" + value + "'");
      }
      c.resize = value == "pad" ? data::ResizeMethod::pad : data::ResizeMethod::bilinear;
    } else if (key == "optim.name") {
      c.optimizer = value;
    } else if (key == "optim.schedule") {
      if (value != "constant" && value != "cosine") {
        fail(ErrorKind::usage, "config key 'optim.schedule': expected constant or cosine, got '" + value + "'");
      }
      c.schedule = value;
    } else if (key == "optim.lr") {
      c.nadam.eta = to_real(key, value);
    } else if (key == "optim.beta1") {
      c.nadam.beta1 = to_real(key, value);
    } else if (key == "optim.beta2") {
      c.nadam.beta2 = to_real(key, value);
    } else if (key == "optim.eps") {
      c.nadam.eps = to_real(key, value);
    } else if (key == "train.batch_size") {
      c.batch_size = to_u64(key, value);
    } else if (key == "train.epochs") {
      c.epochs = to_u64(key, value);
    } else if (key == "train.seed") {
      c.seed = to_u64(key, value);
      have_seed = true;
    } else if (key == "output.dir") {
      c.output_dir = value;
    } else if (key == "eval.bins") {
      c.histogram_bins = to_u64(key, value);
    } else if (key == "eval.split") {
      if (value == "test") {
        c.eval_split = data::Split::test;
      } else if (value == "train") {
        c.eval_split = data::Split::train;
      } else if (value == "validation") {
        c.eval_split = data::Split::validation;
      } else {
        fail(ErrorKind::usage, "config key 'eval.split': expected test, train or validation");
      }
    } else {
      fail(ErrorKind::usage, "unknown config key '" + key + "'");
    }
  }
  if (!have_seed) fail(ErrorKind::usage, "train.seed is required");
  if (c.batch_size == 0) fail(ErrorKind::usage, "train.batch_size must be >= 1");
  if (c.optimizer != "nadam" && c.optimizer != "sgd") {
    fail(ErrorKind::usage, "unknown optimizer '" + c.optimizer + "' (expected nadam or sgd)");
  }
  if (c.model.name != "mbinception" && c.model.name != "vgg" && c.model.name != "resnet" &&
      c.model.name != "mobilenet" && c.model.name != "dense") {
    fail(ErrorKind::usage, "unknown model '" + c.model.name + "'");
  }
  const BaselineDefaults defaults = baseline_defaults(c.model.name);
  if (c.model.width == 0) c.model.width = defaults.width;
  if (c.model.depth == 0) c.model.depth = defaults.depth;
  if (c.data_dir.empty()) c.data_dir = std::filesystem::path("data") / c.dataset;
  c.model.num_classes = data::class_count_of(c.dataset);
  c.model.input_shape = {1, data::kImageSide, data::kImageSide, 3};
  c.model.seed = derive_seed(c.seed, SeedStream::init);
  return c;
}

std::string canonical_text(const RunConfig& c) {
  using metrics::format_real;
  KeyValues kv;
  kv["model.name"] = c.model.name;
  kv["model.n"] = std::to_string(c.model.base_filters);
  kv["model.stages"] = join(c.model.stage_multipliers);
  kv["model.block_dropout"] = format_real(c.model.block_dropout);
  kv["model.head_dropout"] = format_real(c.model.head_dropout);
  kv["model.width"] = std::to_string(c.model.width);
  kv["model.depth"] = std::to_string(c.model.depth);
  kv["data.name"] = c.dataset;
  kv["data.dir"] = c.data_dir.generic_string();
  kv["data.train_limit"] = std::to_string(c.train_limit);
  kv["data.validation_limit"] = std::to_string(c.validation_limit);
  kv["data.test_limit"] = std::to_string(c.test_limit);
  kv["data.validation_fraction"] = format_real(c.validation_fraction);
  kv["data.resize"] = c.resize == data::ResizeMethod::pad ? "pad" : "bilinear";
  kv["optim.name"] = c.optimizer;
  kv["optim.lr"] = format_real(c.nadam.eta);
  kv["optim.beta1"] = format_real(c.nadam.beta1);
  kv["optim.beta2"] = format_real(c.nadam.beta2);
  kv["optim.eps"] = format_real(c.nadam.eps);
  kv["optim.schedule"] = c.schedule;
  kv["train.batch_size"] = std::to_string(c.batch_size);
  kv["train.epochs"] = std::to_string(c.epochs);
  kv["train.seed"] = std::to_string(c.seed);
  kv["output.dir"] = c.output_dir.generic_string();
  kv["eval.bins"] = std::to_string(c.histogram_bins);
  kv["eval.split"] = data::to_string(c.eval_split);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string config_hash(const RunConfig& config) {
  RunConfig c = config;
  c.output_dir = "";
  c.eval_split = data::Split::test;
  const std::string text = canonical_text(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace mbnet
