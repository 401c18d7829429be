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

#include "mbnet/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mbnet {

namespace {

constexpr std::string_view kDescriptionHeader = "mbnet-graph 1";

struct KindName {
  NodeKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {NodeKind::input, "input"},         {NodeKind::conv, "conv"},
    {NodeKind::depthwise, "depthwise"}, {NodeKind::pointwise, "pointwise"},
    {NodeKind::batchnorm, "batchnorm"}, {NodeKind::relu, "relu"},
    {NodeKind::maxpool, "maxpool"},     {NodeKind::dropout, "dropout"},
    {NodeKind::dense, "dense"},         {NodeKind::concat, "concat"},
    {NodeKind::add, "add"},             {NodeKind::flatten, "flatten"},
    {NodeKind::softmax_xent, "softmax_xent"},
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void node_error(ErrorKind kind, const std::string& id, const std::string& what) {
  fail(kind, "node '" + id + "': " + what);
}

bool valid_id(std::string_view id) {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(), [](char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == ',' || ch == '=';
  });
}

}  // namespace

const char* to_string(NodeKind kind) noexcept {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

NodeKind parse_node_kind(std::string_view text) {
  for (const auto& kn : kKindNames) {
    if (text == kn.name) return kn.kind;
  }
  fail(ErrorKind::data, "unknown node kind '" + std::string(text) + "'");
}

ModelGraph::ModelGraph(Shape input_shape, std::string name) : name_(std::move(name)) {
  if (input_shape.size() != 4) {
    fail(ErrorKind::shape, "model input must be NHWC, got " + to_string(input_shape));
  }
  for (auto d : input_shape) {
    if (d == 0) fail(ErrorKind::shape, "model input dimensions must be >= 1, got " + to_string(input_shape));
  }
  LayerNode in;
  in.id = "input";
  in.kind = NodeKind::input;
  in.output_shape = std::move(input_shape);
  nodes_.push_back(std::move(in));
  index_.emplace("input", 0);
}

std::size_t ModelGraph::add(std::string id, NodeKind kind, NodeConfig config, std::vector<std::size_t> inputs) {
  if (finished()) node_error(ErrorKind::shape, id, "graph already has a loss node");
  if (!valid_id(id)) fail(ErrorKind::usage, "invalid node id '" + id + "'");
  if (index_.contains(id)) node_error(ErrorKind::usage, id, "duplicate node id");
  if (kind == NodeKind::input) node_error(ErrorKind::usage, id, "only one input node is allowed");
  for (auto i : inputs) {
    if (i >= nodes_.size()) node_error(ErrorKind::shape, id, "input index " + std::to_string(i) + " does not exist");
  }
  LayerNode node{std::move(id), kind, config, std::move(inputs), {}};
  node.output_shape = infer_shape(node);
  register_parameters(node);
  const std::size_t at = nodes_.size();
  index_.emplace(node.id, at);
  nodes_.push_back(std::move(node));
  if (kind == NodeKind::softmax_xent) loss_node_ = at;
  return at;
}

std::size_t ModelGraph::finish(std::size_t logits) { return add("loss", NodeKind::softmax_xent, {}, {logits}); }

std::size_t ModelGraph::index_of(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail(ErrorKind::usage, "no node named '" + std::string(id) + "'");
  return it->second;
}

std::size_t ModelGraph::loss_node() const {
  if (!finished()) fail(ErrorKind::usage, "model graph has no loss node");
  return loss_node_;
}

std::size_t ModelGraph::logits_node() const { return nodes_[loss_node()].inputs.front(); }

std::size_t ModelGraph::num_classes() const { return nodes_[logits_node()].output_shape.back(); }

Shape ModelGraph::infer_shape(const LayerNode& node) const {
  const auto& cfg = node.config;
  auto arity = [&](std::size_t expected) {
    if (node.inputs.size() != expected) {
      node_error(ErrorKind::shape, node.id, std::string(to_string(node.kind)) + " expects " +
                                                std::to_string(expected) + " input(s), got " +
                                                std::to_string(node.inputs.size()));
    }
  };
  auto in_shape = [&](std::size_t k) -> const Shape& { return nodes_[node.inputs[k]].output_shape; };
  auto need_rank = [&](const Shape& s, std::size_t rank) {
    if (s.size() != rank) {
      node_error(ErrorKind::shape, node.id, std::string(to_string(node.kind)) + " needs a rank-" +
                                                std::to_string(rank) + " input, got " + to_string(s));
    }
  };
  auto spatial = [&](const Shape& s, std::size_t k, std::size_t channels) -> Shape {
    need_rank(s, 4);
    if (k == 0 || cfg.stride == 0) node_error(ErrorKind::domain, node.id, "kernel and stride must be >= 1");
    if (cfg.padding == ops::Padding::valid && (k > s[1] || k > s[2])) {
      node_error(ErrorKind::shape, node.id, "window " + std::to_string(k) + "x" + std::to_string(k) +
                                                " collapses spatial input " + to_string(s) + " below 1");
    }
    const auto gy = ops::window_geometry(s[1], k, cfg.stride, cfg.padding);
    const auto gx = ops::window_geometry(s[2], k, cfg.stride, cfg.padding);
    return {s[0], gy.out, gx.out, channels};
  };

  switch (node.kind) {
    case NodeKind::input:
      node_error(ErrorKind::usage, node.id, "input node cannot be added");
    case NodeKind::conv:
      arity(1);
      if (cfg.filters == 0) node_error(ErrorKind::domain, node.id, "conv needs filters >= 1");
      return spatial(in_shape(0), cfg.kernel, cfg.filters);
    case NodeKind::depthwise:
      arity(1);
      need_rank(in_shape(0), 4);
      return spatial(in_shape(0), cfg.kernel, in_shape(0)[3]);
    case NodeKind::pointwise:
      arity(1);
      if (cfg.filters == 0) node_error(ErrorKind::domain, node.id, "pointwise needs filters >= 1");
      need_rank(in_shape(0), 4);
      return {in_shape(0)[0], in_shape(0)[1], in_shape(0)[2], cfg.filters};
    case NodeKind::batchnorm:
      arity(1);
      if (in_shape(0).size() < 2) node_error(ErrorKind::shape, node.id, "batchnorm needs rank >= 2");
      return in_shape(0);
    case NodeKind::relu:
      arity(1);
      return in_shape(0);
    case NodeKind::dropout:
      arity(1);
      if (!(cfg.rate >= 0.0 && cfg.rate < 1.0)) node_error(ErrorKind::domain, node.id, "dropout rate must be in [0,1)");
      return in_shape(0);
    case NodeKind::maxpool:
      arity(1);
      return spatial(in_shape(0), cfg.kernel, in_shape(0).size() == 4 ? in_shape(0)[3] : 0);
    case NodeKind::dense:
      arity(1);
      need_rank(in_shape(0), 2);
      if (cfg.filters == 0) node_error(ErrorKind::domain, node.id, "dense needs units >= 1");
      return {in_shape(0)[0], cfg.filters};
    case NodeKind::concat: {
      if (node.inputs.empty()) node_error(ErrorKind::shape, node.id, "concat needs at least one input");
      Shape out = in_shape(0);
      std::size_t channels = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const auto& s = in_shape(k);
        if (s.size() != out.size() || !std::equal(s.begin(), s.end() - 1, out.begin())) {
          node_error(ErrorKind::shape, node.id, "concat inputs disagree outside the channel axis: " +
                                                    to_string(s) + " vs " + to_string(out));
        }
        channels += s.back();
      }
      out.back() = channels;
      return out;
    }
    case NodeKind::add:
      arity(2);
      if (in_shape(0) != in_shape(1)) {
        node_error(ErrorKind::shape, node.id, "residual add needs equal shapes, got " + to_string(in_shape(0)) +
                                                  " and " + to_string(in_shape(1)));
      }
      return in_shape(0);
    case NodeKind::flatten: {
      arity(1);
      const auto& s = in_shape(0);
      return {s[0], element_count(s) / s[0]};
    }
    case NodeKind::softmax_xent:
      arity(1);
      need_rank(in_shape(0), 2);
      return in_shape(0);
  }
  node_error(ErrorKind::usage, node.id, "unhandled node kind");
}

void ModelGraph::register_parameters(const LayerNode& node) {
  const auto& in = nodes_[node.inputs.empty() ? 0 : node.inputs.front()].output_shape;
  const auto& cfg = node.config;
  const std::string& id = node.id;
  switch (node.kind) {
    case NodeKind::conv:
      params_[id + ".kernel"] = Tensor({cfg.kernel, cfg.kernel, in.back(), cfg.filters});
      params_[id + ".bias"] = Tensor({cfg.filters});
      break;
    case NodeKind::pointwise:
      params_[id + ".kernel"] = Tensor({1, 1, in.back(), cfg.filters});
      params_[id + ".bias"] = Tensor({cfg.filters});
      break;
    case NodeKind::depthwise:
      params_[id + ".kernel"] = Tensor({cfg.kernel, cfg.kernel, in.back(), 1});
      params_[id + ".bias"] = Tensor({in.back()});
      break;
    case NodeKind::batchnorm:
      params_[id + ".gamma"] = Tensor({in.back()}, 1.0);
      params_[id + ".beta"] = Tensor({in.back()}, 0.0);
      buffers_[id + ".running_mean"] = Tensor({in.back()}, 0.0);
      buffers_[id + ".running_var"] = Tensor({in.back()}, 1.0);
      break;
    case NodeKind::dense:
      params_[id + ".weight"] = Tensor({in.back(), cfg.filters});
      params_[id + ".bias"] = Tensor({cfg.filters});
      break;
    default:
      break;
  }
}

void ModelGraph::initialize(std::uint64_t seed) {
  ops::Rng rng(seed);
  for (const auto& node : nodes_) {
    const auto& id = node.id;
    Tensor* weights = nullptr;
    std::size_t fan_in = 0;
    switch (node.kind) {
      case NodeKind::conv:
      case NodeKind::pointwise:
      case NodeKind::depthwise: {
        weights = &params_.at(id + ".kernel");
        const auto& s = weights->shape();
        fan_in = node.kind == NodeKind::depthwise ? s[0] * s[1] : s[0] * s[1] * s[2];
        params_.at(id + ".bias").fill(0.0);
        break;
      }
      case NodeKind::dense:
        weights = &params_.at(id + ".weight");
        fan_in = weights->dim(0);
        params_.at(id + ".bias").fill(0.0);
        break;
      case NodeKind::batchnorm:
        params_.at(id + ".gamma").fill(1.0);
        params_.at(id + ".beta").fill(0.0);
        buffers_.at(id + ".running_mean").fill(0.0);
        buffers_.at(id + ".running_var").fill(1.0);
        break;
      default:
        break;
    }
    if (weights) {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (auto& v : weights->data()) v = dist(rng);
    }
  }
}

std::size_t count_parameters(const ModelGraph& model) {
  std::size_t total = 0;
  for (const auto& [name, t] : model.parameters()) total += t.size();
  return total;
}

// ------------------------------------------------------------ description

std::string ModelGraph::describe() const {
  std::ostringstream os;
  os << kDescriptionHeader << '\n';
  os << "name " << name_ << '\n';
  os << "input";
  for (auto d : input_shape()) os << ' ' << d;
  os << '\n';
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    const auto& c = n.config;
    os << "node " << n.id << ' ' << to_string(n.kind);
    switch (n.kind) {
      case NodeKind::conv:
      case NodeKind::depthwise:
      case NodeKind::maxpool:
        if (n.kind == NodeKind::conv) os << " filters=" << c.filters;
        os << " kernel=" << c.kernel << " stride=" << c.stride
           << " padding=" << (c.padding == ops::Padding::same ? "same" : "valid");
        break;
      case NodeKind::pointwise:
      case NodeKind::dense:
        os << " filters=" << c.filters;
        break;
      case NodeKind::batchnorm:
        os << " momentum=" << format_double(c.momentum) << " eps=" << format_double(c.eps);
        break;
      case NodeKind::dropout:
        os << " rate=" << format_double(c.rate);
        break;
      default:
        break;
    }
    os << " inputs=";
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      if (k) os << ',';
      os << nodes_[n.inputs[k]].id;
    }
    os << '\n';
  }
  return os.str();
}

namespace {

std::size_t parse_size(std::string_view text, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorKind::data, "model description line " + std::to_string(line) + ": bad integer '" +
                              std::string(text) + "'");
  }
  return v;
}

double parse_real(std::string_view text, std::size_t line) {
  std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    fail(ErrorKind::data, "model description line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

ModelGraph ModelGraph::parse(std::string_view description) {
  std::istringstream in{std::string(description)};
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };

  if (!next_line() || line != kDescriptionHeader) {
    fail(ErrorKind::data, "model description: missing '" + std::string(kDescriptionHeader) + "' header");
  }
  std::string name = "model";
  if (!next_line()) fail(ErrorKind::data, "model description: truncated");
  if (line.rfind("name ", 0) == 0) {
    name = line.substr(5);
    if (!next_line()) fail(ErrorKind::data, "model description: truncated");
  }
  std::istringstream input_line(line);
  std::string word;
  input_line >> word;
  if (word != "input") fail(ErrorKind::data, "model description line " + std::to_string(line_no) + ": expected input");
  Shape shape;
  while (input_line >> word) shape.push_back(parse_size(word, line_no));

  ModelGraph graph(shape, name);
  while (next_line()) {
    std::istringstream ls(line);
    std::string tag, id, kind;
    ls >> tag >> id >> kind;
    if (tag != "node" || id.empty() || kind.empty()) {
      fail(ErrorKind::data, "model description line " + std::to_string(line_no) + ": malformed node line");
    }
    NodeConfig cfg;
    std::vector<std::size_t> inputs;
    while (ls >> word) {
      const auto eq = word.find('=');
      if (eq == std::string::npos) {
        fail(ErrorKind::data, "model description line " + std::to_string(line_no) + ": expected key=value");
      }
      const std::string key = word.substr(0, eq);
      const std::string value = word.substr(eq + 1);
      if (key == "filters") {
        cfg.filters = parse_size(value, line_no);
      } else if (key == "kernel") {
        cfg.kernel = parse_size(value, line_no);
      } else if (key == "stride") {
        cfg.stride = parse_size(value, line_no);
      } else if (key == "padding") {
        if (value != "same" && value != "valid") {
          fail(ErrorKind::data, "model description line " + std::to_string(line_no) + ": bad padding");
        }
        cfg.padding = value == "same" ? ops::Padding::same : ops::Padding::valid;
      } else if (key == "rate") {
        cfg.rate = parse_real(value, line_no);
      } else if (key == "momentum") {
        cfg.momentum = parse_real(value, line_no);
      } else if (key == "eps") {
        cfg.eps = parse_real(value, line_no);
      } else if (key == "inputs") {
        std::istringstream ids(value);
        std::string ref;
        while (std::getline(ids, ref, ',')) inputs.push_back(graph.index_of(ref));
      } else {
        fail(ErrorKind::data, "model description line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    }
    graph.add(id, parse_node_kind(kind), cfg, std::move(inputs));
  }
  return graph;
}

// -------------------------------------------------------------- execution

namespace {

// Shared forward loop. `buffers` is null for the const predict path, in which
// case batch-norm reads running statistics from copies.
ForwardPass run_forward(const ModelGraph& model, ParameterStore* buffers, const Tensor& batch, ops::Mode mode,
                        ops::Rng* rng, bool keep_contexts) {
  const auto& nodes = model.nodes();
  const Shape& declared = model.input_shape();
  if (batch.rank() != 4 || batch.dim(1) != declared[1] || batch.dim(2) != declared[2] ||
      batch.dim(3) != declared[3]) {
    fail(ErrorKind::shape, "node 'input': batch " + to_string(batch.shape()) + " does not match model input [N," +
                               std::to_string(declared[1]) + "," + std::to_string(declared[2]) + "," +
                               std::to_string(declared[3]) + "]");
  }
  const auto& params = model.parameters();
  ForwardPass fp;
  fp.mode = mode;
  fp.outputs.resize(nodes.size());
  fp.contexts.resize(nodes.size());
  fp.logits_node = model.logits_node();
  fp.outputs[0] = batch;

  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    const auto& cfg = node.config;
    const Tensor& x = fp.outputs[node.inputs.front()];
    auto& ctx = fp.contexts[i];
    auto p = [&](const char* suffix) -> const Tensor& { return params.at(node.id + suffix); };
    try {
      Tensor out;
      switch (node.kind) {
        case NodeKind::input:
          break;
        case NodeKind::conv: {
          ops::ConvContext c;
          out = ops::conv2d_forward(x, p(".kernel"), p(".bias"), {cfg.stride, cfg.padding}, keep_contexts ? &c : nullptr);
          if (keep_contexts) ctx = std::move(c);
          break;
        }
        case NodeKind::pointwise: {
          ops::ConvContext c;
          out = ops::pointwise_conv2d_forward(x, p(".kernel"), p(".bias"), keep_contexts ? &c : nullptr);
          if (keep_contexts) ctx = std::move(c);
          break;
        }
        case NodeKind::depthwise: {
          ops::ConvContext c;
          out = ops::depthwise_conv2d_forward(x, p(".kernel"), p(".bias"), {cfg.stride, cfg.padding},
                                              keep_contexts ? &c : nullptr);
          if (keep_contexts) ctx = std::move(c);
          break;
        }
        case NodeKind::batchnorm: {
          ops::BatchNormContext c;
          const ops::BatchNormConfig bn{mode, cfg.momentum, cfg.eps};
          if (buffers) {
            out = ops::batchnorm_forward(x, p(".gamma"), p(".beta"), buffers->at(node.id + ".running_mean"),
                                         buffers->at(node.id + ".running_var"), bn, keep_contexts ? &c : nullptr);
          } else {
            Tensor mean = model.buffers().at(node.id + ".running_mean");
            Tensor var = model.buffers().at(node.id + ".running_var");
            out = ops::batchnorm_forward(x, p(".gamma"), p(".beta"), mean, var, bn, keep_contexts ? &c : nullptr);
          }
          if (keep_contexts) ctx = std::move(c);
          break;
        }
        case NodeKind::relu: {
          ops::ReluContext c;
          out = ops::relu_forward(x, keep_contexts ? &c : nullptr);
          if (keep_contexts) ctx = std::move(c);
          break;
        }
        case NodeKind::maxpool: {
          ops::PoolContext c;
          out = ops::maxpool2d_forward(x, {cfg.kernel, cfg.stride, cfg.padding}, keep_contexts ? &c : nullptr);
          if (keep_contexts) ctx = std::move(c);
          break;
        }
        case NodeKind::dropout: {
          ops::DropoutContext c;
          if (mode == ops::Mode::train && !rng) fail(ErrorKind::usage, "train-mode dropout needs an rng");
          ops::Rng unused;
          out = ops::dropout_forward(x, cfg.rate, rng ? *rng : unused, mode, keep_contexts ? &c : nullptr);
          if (keep_contexts) ctx = std::move(c);
          break;
        }
        case NodeKind::dense: {
          ops::DenseContext c;
          out = ops::dense_forward(x, p(".weight"), p(".bias"), keep_contexts ? &c : nullptr);
          if (keep_contexts) ctx = std::move(c);
          break;
        }
        case NodeKind::concat: {
          std::vector<const Tensor*> parts;
          for (auto k : node.inputs) parts.push_back(&fp.outputs[k]);
          out = concat(parts, parts.front()->rank() - 1);
          break;
        }
        case NodeKind::add:
          out = add(x, fp.outputs[node.inputs[1]]);
          break;
        case NodeKind::flatten:
          out = reshape(x, {x.dim(0), x.size() / x.dim(0)});
          break;
        case NodeKind::softmax_xent: {
          if (x.rank() != 2) fail(ErrorKind::shape, "logits must be rank 2");
          // Probabilities only; the loss needs labels and is evaluated in backward.
          out = Tensor(x.shape());
          const std::size_t k = x.dim(1);
          for (std::size_t r = 0; r < x.dim(0); ++r) {
            const double* row = x.raw() + r * k;
            const double peak = *std::max_element(row, row + k);
            double total = 0.0;
            for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - peak);
            for (std::size_t j = 0; j < k; ++j) out[r * k + j] = std::exp(row[j] - peak) / total;
          }
          break;
        }
      }
      fp.outputs[i] = std::move(out);
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.rfind("node '", 0) == 0) throw;
      node_error(e.kind(), node.id, msg);
    }
  }
  return fp;
}

}  // namespace

ForwardPass graph_forward(ModelGraph& model, const Tensor& batch, ops::Mode mode, ops::Rng& rng) {
  return run_forward(model, &model.buffers(), batch, mode, &rng, true);
}

Tensor graph_predict(const ModelGraph& model, const Tensor& batch) {
  auto fp = run_forward(model, nullptr, batch, ops::Mode::infer, nullptr, false);
  return std::move(fp.outputs[fp.logits_node]);
}

BackwardPass graph_backward(const ModelGraph& model, const ForwardPass& forward, std::span<const int> labels,
                            double loss_scale) {
  const auto& nodes = model.nodes();
  if (forward.outputs.size() != nodes.size()) {
    fail(ErrorKind::usage, "forward pass does not belong to this model");
  }
  BackwardPass bp;
  for (const auto& [name, t] : model.parameters()) bp.grads.emplace(name, Tensor(t.shape()));

  std::vector<Tensor> grad(nodes.size());
  auto send = [&](std::size_t to, Tensor g) {
    if (grad[to].empty()) {
      grad[to] = std::move(g);
    } else {
      accumulate(grad[to], g);
    }
  };

  const std::size_t loss_at = model.loss_node();
  {
    auto sce = ops::softmax_cross_entropy(forward.logits(), labels);
    bp.loss = sce.loss * loss_scale;
    grad[loss_at] = loss_scale == 1.0 ? std::move(sce.grad_logits) : scale(sce.grad_logits, loss_scale);
  }

  for (std::size_t i = nodes.size(); i-- > 1;) {
    if (grad[i].empty()) continue;
    const auto& node = nodes[i];
    const Tensor& g = grad[i];
    const auto& ctx = forward.contexts[i];
    auto accumulate_param = [&](const char* suffix, const Tensor& t) { accumulate(bp.grads.at(node.id + suffix), t); };
    try {
      switch (node.kind) {
        case NodeKind::input:
          break;
        case NodeKind::softmax_xent:
          send(node.inputs[0], g);
          break;
        case NodeKind::conv:
        case NodeKind::pointwise:
        case NodeKind::depthwise: {
          const auto& c = std::get<ops::ConvContext>(ctx);
          auto cg = node.kind == NodeKind::depthwise ? ops::depthwise_conv2d_backward(c, g) : ops::conv2d_backward(c, g);
          accumulate_param(".kernel", cg.kernel);
          accumulate_param(".bias", cg.bias);
          send(node.inputs[0], std::move(cg.input));
          break;
        }
        case NodeKind::batchnorm: {
          auto bg = ops::batchnorm_backward(std::get<ops::BatchNormContext>(ctx), g);
          accumulate_param(".gamma", bg.gamma);
          accumulate_param(".beta", bg.beta);
          send(node.inputs[0], std::move(bg.input));
          break;
        }
        case NodeKind::relu:
          send(node.inputs[0], ops::relu_backward(std::get<ops::ReluContext>(ctx), g));
          break;
        case NodeKind::maxpool:
          send(node.inputs[0], ops::maxpool2d_backward(std::get<ops::PoolContext>(ctx), g));
          break;
        case NodeKind::dropout:
          send(node.inputs[0], ops::dropout_backward(std::get<ops::DropoutContext>(ctx), g));
          break;
        case NodeKind::dense: {
          auto dg = ops::dense_backward(std::get<ops::DenseContext>(ctx), g);
          accumulate_param(".weight", dg.weight);
          accumulate_param(".bias", dg.bias);
          send(node.inputs[0], std::move(dg.input));
          break;
        }
        case NodeKind::concat: {
          const std::size_t axis = g.rank() - 1;
          std::size_t start = 0;
          for (auto k : node.inputs) {
            const std::size_t width = nodes[k].output_shape.back();
            send(k, slice(g, axis, start, width));
            start += width;
          }
          break;
        }
        case NodeKind::add:
          send(node.inputs[0], g);
          send(node.inputs[1], g);
          break;
        case NodeKind::flatten:
          send(node.inputs[0], reshape(g, forward.outputs[node.inputs[0]].shape()));
          break;
      }
    } catch (const std::bad_variant_access&) {
      node_error(ErrorKind::usage, node.id, "backward needs a train-capable forward pass with contexts");
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.rfind("node '", 0) == 0) throw;
      node_error(e.kind(), node.id, msg);
    }
  }
  bp.input_grad = grad[0].empty() ? Tensor(forward.outputs[0].shape()) : std::move(grad[0]);
  return bp;
}

}  // namespace mbnet
