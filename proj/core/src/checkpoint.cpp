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

#include "mbnet/checkpoint.hpp"

#include <fstream>

#include "mbnet/serialize.hpp"

namespace mbnet {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'M', 'B', 'N', 'E', 'T', 'C', 'K', 'P'};

void write_store(std::ostream& out, const ParameterStore& store) {
  write_u64(out, store.size());
  for (const auto& [name, t] : store) {
    write_string(out, name);
    write_tensor(out, t);
  }
}

void read_store_into(std::istream& in, ParameterStore& store, const char* what) {
  const auto n = read_u64(in);
  if (n != store.size()) {
    fail(ErrorKind::data, std::string("checkpoint ") + what + " count " + std::to_string(n) +
                              " does not match the model's " + std::to_string(store.size()));
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto name = read_string(in);
    auto t = read_tensor(in);
    auto it = store.find(name);
    if (it == store.end()) fail(ErrorKind::data, std::string("checkpoint ") + what + " '" + name + "' is unknown");
    if (it->second.shape() != t.shape()) {
      fail(ErrorKind::data, "checkpoint tensor '" + name + "' has shape " + to_string(t.shape()) + ", model expects " +
                                to_string(it->second.shape()));
    }
    it->second = std::move(t);
  }
}

}  // namespace

void save_checkpoint(const fs::path& path, const ModelGraph& model, const Optimizer* optimizer,
                     const std::string& config_text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::data, "cannot write '" + tmp.string() + "'");
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kCheckpointVersion);
    write_string(out, model.describe());
    write_store(out, model.parameters());
    write_store(out, model.buffers());
    write_u8(out, optimizer ? 1 : 0);
    if (optimizer) {
      write_string(out, optimizer->name());
      optimizer->save(out);
    }
    write_string(out, config_text);
    out.flush();
    if (!out) fail(ErrorKind::data, "failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof kMagic] = {};
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || !std::equal(magic, magic + sizeof magic, kMagic)) {
    fail(ErrorKind::data, "'" + path.string() + "' is not an mbnet checkpoint");
  }
  const auto version = read_u32(in);
  if (version != kCheckpointVersion) {
    fail(ErrorKind::data, "checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck{ModelGraph::parse(read_string(in)), nullptr, {}};
  read_store_into(in, ck.model.parameters(), "parameter");
  read_store_into(in, ck.model.buffers(), "buffer");
  if (read_u8(in) != 0) {
    const auto name = read_string(in);
    ck.optimizer = make_optimizer(name, NadamHyper{});
    ck.optimizer->load(in);
  }
  ck.config_text = read_string(in);
  return ck;
}

}  // namespace mbnet
