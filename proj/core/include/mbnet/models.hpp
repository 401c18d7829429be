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

// Architecture builders. Every builder returns a finished, initialized graph.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mbnet/graph.hpp"

namespace mbnet {

/// Channel budget of one inception module: four branches of filters/4
/// (1x1; 1x1 reduce -> 3x3; 1x1 reduce -> 5x5; 3x3 max pool -> 1x1), with
/// reducers of width max(1, filters/8). Reducers are linear; the only
/// nonlinearity follows the module's batch norm.
struct InceptionAllocation {
  std::size_t branch1x1 = 0;
  std::size_t reduce3x3 = 0;
  std::size_t branch3x3 = 0;
  std::size_t reduce5x5 = 0;
  std::size_t branch5x5 = 0;
  std::size_t pool_projection = 0;

  std::size_t total() const { return branch1x1 + branch3x3 + branch5x5 + pool_projection; }
};

InceptionAllocation inception_allocation(std::size_t filters);

/// Appends one inception module (stride 1, same padding) and returns the
/// index of its channel concatenation.
std::size_t add_inception_module(ModelGraph& graph, const std::string& prefix, std::size_t input,
                                 std::size_t filters);

struct MBInceptionConfig {
  Shape input_shape = {1, 32, 32, 3};
  std::size_t base_filters = 8;  // n
  std::vector<std::size_t> stage_multipliers = {1, 2, 4, 8};
  std::size_t num_classes = 10;
  double block_dropout = 0.25;
  double head_dropout = 0.5;
  std::size_t stem_filters = 0;  // 0 means base_filters
  std::uint64_t seed = 0;
};

/// Stem (7x7/2 conv, batch norm, ReLU, 3x3/2 max pool), then one main block
/// per stage multiplier, then flatten, dropout and a dense classifier.
///
/// A main block with f filters runs two first-block passes, each followed by
/// a 3x3 conv to f channels with batch norm and ReLU. A first-block pass is:
/// 1x1 conv to f, inception, batch norm, ReLU, dropout, inception, batch norm,
/// channel concatenation with the pass input, ReLU. The second 3x3 conv of
/// every stage but the last has stride 2.
ModelGraph build_mbinception(const MBInceptionConfig& config);

struct BaselineConfig {
  Shape input_shape = {1, 32, 32, 3};
  std::size_t width = 16;  // channels of the first stage; doubles per stage
  std::size_t depth = 3;   // number of stages, 1..4
  std::size_t num_classes = 10;
  double head_dropout = 0.5;
  std::uint64_t seed = 0;
};

/// Stages of two 3x3 conv + ReLU layers separated by 2x2 max pooling, then
/// dense(4*width) + ReLU + dropout + dense(num_classes).
ModelGraph build_vgg_style(const BaselineConfig& config);

/// 3x3 stem, then per stage two residual blocks (conv-BN-ReLU-conv-BN plus a
/// skip, added, then ReLU). The skip is the identity unless channels or
/// stride change, in which case it is a strided 1x1 projection.
ModelGraph build_resnet_style(const BaselineConfig& config);

/// 3x3 stem, then per stage one depthwise 3x3 with stride 2 and one
/// pointwise conv, each with batch norm and ReLU. Halving every stage keeps
/// the head the same size as the vgg-style head's input.
ModelGraph build_mobilenet_style(const BaselineConfig& config);

/// Default desk-scale width and depth of a baseline. All are 16 wide with
/// three stages except resnet, which gets a fourth stage so that the default
/// sizes order as mobilenet < mbinception < resnet.
struct BaselineDefaults {
  std::size_t width = 16;
  std::size_t depth = 3;
};

BaselineDefaults baseline_defaults(const std::string& name);

/// Architecture selection shared by the CLI and the comparison harness.
/// `name` is one of mbinception, vgg, resnet, mobilenet, dense; the
/// mbinception fields and the baseline fields apply to their respective
/// builders. A width or depth of 0 selects baseline_defaults(name).
struct ModelSpec {
  std::string name = "mbinception";
  Shape input_shape = {1, 32, 32, 3};
  std::size_t num_classes = 10;
  std::uint64_t seed = 0;

  std::size_t base_filters = 8;
  std::vector<std::size_t> stage_multipliers = {1, 2, 4, 8};
  double block_dropout = 0.25;
  double head_dropout = 0.5;

  std::size_t width = 0;
  std::size_t depth = 0;
};

ModelGraph build_model(const ModelSpec& spec);

}  // namespace mbnet
