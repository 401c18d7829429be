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

// Layer graphs: node definitions, shape inference, parameter registration,
// execution (forward/backward through the DAG) and the textual description
// format used by checkpoints.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mbnet/ops.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

enum class NodeKind {
  input,
  conv,
  depthwise,
  pointwise,
  batchnorm,
  relu,
  maxpool,
  dropout,
  dense,
  concat,
  add,
  flatten,
  softmax_xent,
};

const char* to_string(NodeKind kind) noexcept;
NodeKind parse_node_kind(std::string_view text);

/// Union of the per-kind settings; each kind reads only the fields it needs.
struct NodeConfig {
  std::size_t filters = 0;  // conv/pointwise output channels, dense units
  std::size_t kernel = 0;   // conv/depthwise kernel extent, maxpool window
  std::size_t stride = 1;
  ops::Padding padding = ops::Padding::same;
  double rate = 0.0;        // dropout
  double momentum = 0.9;    // batchnorm
  double eps = 1e-5;        // batchnorm
};

struct LayerNode {
  std::string id;
  NodeKind kind = NodeKind::input;
  NodeConfig config;
  std::vector<std::size_t> inputs;  // indices of earlier nodes
  Shape output_shape;               // inferred for the declared input batch
};

/// Named trainable tensors, ordered by name.
using ParameterStore = std::map<std::string, Tensor>;
using GradientStore = std::map<std::string, Tensor>;

/// A topologically ordered DAG with a single image input (node 0) and, once
/// finished, a single softmax cross-entropy output node.
///
/// Nodes are appended with add(); each call infers the node's output shape
/// immediately and registers its parameters, so a graph is always valid up to
/// its last node. Shape errors name the offending node id.
class ModelGraph {
 public:
  explicit ModelGraph(Shape input_shape, std::string name = "model");

  std::size_t add(std::string id, NodeKind kind, NodeConfig config, std::vector<std::size_t> inputs);
  /// Appends the loss node on top of `logits` (rank-2 [N,K]).
  std::size_t finish(std::size_t logits);

  /// Draws weights from N(0, 2/fan_in); gamma=1, beta=0, biases 0, running
  /// statistics (0, 1).
  void initialize(std::uint64_t seed);

  const std::string& name() const noexcept { return name_; }
  const Shape& input_shape() const noexcept { return nodes_.front().output_shape; }
  const std::vector<LayerNode>& nodes() const noexcept { return nodes_; }
  const LayerNode& node(std::size_t index) const { return nodes_.at(index); }
  std::size_t index_of(std::string_view id) const;
  bool finished() const noexcept { return loss_node_ != 0; }
  std::size_t loss_node() const;
  std::size_t logits_node() const;
  std::size_t num_classes() const;

  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }
  /// Non-trainable state (batch-norm running statistics).
  ParameterStore& buffers() noexcept { return buffers_; }
  const ParameterStore& buffers() const noexcept { return buffers_; }

  /// Textual description: header, input shape, one line per node.
  std::string describe() const;
  /// Rebuilds a graph from describe() output; parameters take their
  /// registration defaults (call initialize() or load values afterwards).
  static ModelGraph parse(std::string_view description);

 private:
  Shape infer_shape(const LayerNode& node) const;
  void register_parameters(const LayerNode& node);

  std::string name_;
  std::vector<LayerNode> nodes_;
  std::map<std::string, std::size_t, std::less<>> index_;
  ParameterStore params_;
  ParameterStore buffers_;
  std::size_t loss_node_ = 0;
};

/// Sum of element counts of all trainable tensors (running statistics excluded).
std::size_t count_parameters(const ModelGraph& model);

using NodeContext = std::variant<std::monostate, ops::ConvContext, ops::BatchNormContext, ops::ReluContext,
                                 ops::PoolContext, ops::DropoutContext, ops::DenseContext>;

struct ForwardPass {
  ops::Mode mode = ops::Mode::infer;
  std::vector<Tensor> outputs;  // one per node; the loss node holds softmax probabilities
  std::vector<NodeContext> contexts;
  std::size_t logits_node = 0;

  const Tensor& logits() const { return outputs.at(logits_node); }
  const Tensor& probabilities() const { return outputs.back(); }
};

/// Evaluates every node in order. Train mode updates batch-norm running
/// statistics and draws dropout masks from `rng`.
ForwardPass graph_forward(ModelGraph& model, const Tensor& batch, ops::Mode mode, ops::Rng& rng);

/// Infer-mode logits without retaining contexts; does not touch the model.
Tensor graph_predict(const ModelGraph& model, const Tensor& batch);

struct BackwardPass {
  double loss = 0.0;
  GradientStore grads;  // one entry per trainable parameter
  Tensor input_grad;
};

/// Reverse sweep from the loss node. Gradients of nodes feeding several
/// consumers are summed. The loss (and so every gradient) is multiplied by
/// loss_scale.
BackwardPass graph_backward(const ModelGraph& model, const ForwardPass& forward, std::span<const int> labels,
                            double loss_scale = 1.0);

}  // namespace mbnet
