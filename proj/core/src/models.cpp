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

#include "mbnet/models.hpp"

#include <algorithm>

namespace mbnet {

namespace {

NodeConfig conv_cfg(std::size_t filters, std::size_t kernel, std::size_t stride = 1) {
  NodeConfig c;
  c.filters = filters;
  c.kernel = kernel;
  c.stride = stride;
  c.padding = ops::Padding::same;
  return c;
}

NodeConfig pool_cfg(std::size_t window, std::size_t stride, ops::Padding padding) {
  NodeConfig c;
  c.kernel = window;
  c.stride = stride;
  c.padding = padding;
  return c;
}

NodeConfig dropout_cfg(double rate) {
  NodeConfig c;
  c.rate = rate;
  return c;
}

NodeConfig dense_cfg(std::size_t units) {
  NodeConfig c;
  c.filters = units;
  return c;
}

// conv -> batch norm -> ReLU; returns the ReLU node.
std::size_t conv_bn_relu(ModelGraph& g, const std::string& prefix, std::size_t input, std::size_t filters,
                         std::size_t kernel, std::size_t stride = 1) {
  auto c = g.add(prefix + ".conv", NodeKind::conv, conv_cfg(filters, kernel, stride), {input});
  auto b = g.add(prefix + ".bn", NodeKind::batchnorm, {}, {c});
  return g.add(prefix + ".relu", NodeKind::relu, {}, {b});
}

void check_common(const Shape& input_shape, std::size_t num_classes) {
  if (input_shape.size() != 4) fail(ErrorKind::usage, "input shape must be [N,H,W,C], got " + to_string(input_shape));
  if (num_classes < 2) fail(ErrorKind::usage, "num_classes must be >= 2");
}

void check_baseline(const BaselineConfig& cfg) {
  check_common(cfg.input_shape, cfg.num_classes);
  if (cfg.width < 1) fail(ErrorKind::usage, "width must be >= 1");
  if (cfg.depth < 1 || cfg.depth > 4) fail(ErrorKind::usage, "depth must be in 1..4, got " + std::to_string(cfg.depth));
}

std::size_t classifier_head(ModelGraph& g, std::size_t features, double dropout, std::size_t num_classes) {
  auto f = g.add("head.flatten", NodeKind::flatten, {}, {features});
  auto d = g.add("head.dropout", NodeKind::dropout, dropout_cfg(dropout), {f});
  return g.add("head.dense", NodeKind::dense, dense_cfg(num_classes), {d});
}

}  // namespace

InceptionAllocation inception_allocation(std::size_t filters) {
  if (filters < 4 || filters % 4 != 0) {
    fail(ErrorKind::usage, "inception filter budget must be a positive multiple of 4, got " + std::to_string(filters));
  }
  const std::size_t quarter = filters / 4;
  const std::size_t reduce = std::max<std::size_t>(1, filters / 8);
  return {quarter, reduce, quarter, reduce, quarter, quarter};
}

std::size_t add_inception_module(ModelGraph& g, const std::string& prefix, std::size_t input, std::size_t filters) {
  const auto a = inception_allocation(filters);

  auto b1 = g.add(prefix + ".b1.conv1x1", NodeKind::conv, conv_cfg(a.branch1x1, 1), {input});

  auto r3 = g.add(prefix + ".b2.reduce", NodeKind::conv, conv_cfg(a.reduce3x3, 1), {input});
  auto b2 = g.add(prefix + ".b2.conv3x3", NodeKind::conv, conv_cfg(a.branch3x3, 3), {r3});

  auto r5 = g.add(prefix + ".b3.reduce", NodeKind::conv, conv_cfg(a.reduce5x5, 1), {input});
  auto b3 = g.add(prefix + ".b3.conv5x5", NodeKind::conv, conv_cfg(a.branch5x5, 5), {r5});

  auto pool = g.add(prefix + ".b4.pool", NodeKind::maxpool, pool_cfg(3, 1, ops::Padding::same), {input});
  auto b4 = g.add(prefix + ".b4.proj", NodeKind::conv, conv_cfg(a.pool_projection, 1), {pool});

  return g.add(prefix + ".concat", NodeKind::concat, {}, {b1, b2, b3, b4});
}

namespace {

// 1x1 conv, inception, BN, ReLU, dropout, inception, BN, concat with the
// pass input, ReLU.
std::size_t first_block_pass(ModelGraph& g, const std::string& prefix, std::size_t input, std::size_t filters,
                             double dropout) {
  auto entry = g.add(prefix + ".conv1x1", NodeKind::conv, conv_cfg(filters, 1), {input});
  auto inc1 = add_inception_module(g, prefix + ".inception1", entry, filters);
  auto bn1 = g.add(prefix + ".bn1", NodeKind::batchnorm, {}, {inc1});
  auto relu1 = g.add(prefix + ".relu1", NodeKind::relu, {}, {bn1});
  auto drop = g.add(prefix + ".dropout", NodeKind::dropout, dropout_cfg(dropout), {relu1});
  auto inc2 = add_inception_module(g, prefix + ".inception2", drop, filters);
  auto bn2 = g.add(prefix + ".bn2", NodeKind::batchnorm, {}, {inc2});
  auto skip = g.add(prefix + ".concat", NodeKind::concat, {}, {bn2, input});
  return g.add(prefix + ".relu", NodeKind::relu, {}, {skip});
}

}  // namespace

ModelGraph build_mbinception(const MBInceptionConfig& cfg) {
  check_common(cfg.input_shape, cfg.num_classes);
  if (cfg.base_filters < 4 || cfg.base_filters % 4 != 0) {
    fail(ErrorKind::usage, "mbinception: base filter count n must be >= 4 and divisible by 4, got " +
                               std::to_string(cfg.base_filters));
  }
  if (cfg.stage_multipliers.empty()) fail(ErrorKind::usage, "mbinception: at least one stage is required");
  for (auto m : cfg.stage_multipliers) {
    if (m == 0) fail(ErrorKind::usage, "mbinception: stage multipliers must be >= 1");
  }

  ModelGraph g(cfg.input_shape, "mbinception");
  std::size_t x = 0;
  try {
    const std::size_t stem_filters = cfg.stem_filters ? cfg.stem_filters : cfg.base_filters;
    x = conv_bn_relu(g, "stem", x, stem_filters, 7, 2);
    x = g.add("stem.pool", NodeKind::maxpool, pool_cfg(3, 2, ops::Padding::same), {x});
  } catch (const Error& e) {
    fail(e.kind(), std::string("mbinception stem: ") + e.what());
  }

  const std::size_t stages = cfg.stage_multipliers.size();
  for (std::size_t s = 0; s < stages; ++s) {
    const std::size_t filters = cfg.base_filters * cfg.stage_multipliers[s];
    const std::string stage = "stage" + std::to_string(s + 1);
    try {
      x = first_block_pass(g, stage + ".pass1", x, filters, cfg.block_dropout);
      x = conv_bn_relu(g, stage + ".main1", x, filters, 3);
      x = first_block_pass(g, stage + ".pass2", x, filters, cfg.block_dropout);
      x = conv_bn_relu(g, stage + ".main2", x, filters, 3, s + 1 < stages ? 2 : 1);
    } catch (const Error& e) {
      fail(e.kind(), "mbinception " + stage + " (" + std::to_string(filters) + " filters): " + e.what());
    }
  }

  g.finish(classifier_head(g, x, cfg.head_dropout, cfg.num_classes));
  g.initialize(cfg.seed);
  return g;
}

ModelGraph build_vgg_style(const BaselineConfig& cfg) {
  check_baseline(cfg);
  ModelGraph g(cfg.input_shape, "vgg");
  std::size_t x = 0;
  std::size_t filters = cfg.width;
  for (std::size_t s = 0; s < cfg.depth; ++s, filters *= 2) {
    const std::string stage = "stage" + std::to_string(s + 1);
    try {
      auto c1 = g.add(stage + ".conv1", NodeKind::conv, conv_cfg(filters, 3), {x});
      auto r1 = g.add(stage + ".relu1", NodeKind::relu, {}, {c1});
      auto c2 = g.add(stage + ".conv2", NodeKind::conv, conv_cfg(filters, 3), {r1});
      auto r2 = g.add(stage + ".relu2", NodeKind::relu, {}, {c2});
      x = g.add(stage + ".pool", NodeKind::maxpool, pool_cfg(2, 2, ops::Padding::valid), {r2});
    } catch (const Error& e) {
      fail(e.kind(), "vgg " + stage + ": " + e.what());
    }
  }
  auto f = g.add("head.flatten", NodeKind::flatten, {}, {x});
  auto h = g.add("head.hidden", NodeKind::dense, dense_cfg(4 * cfg.width), {f});
  auto hr = g.add("head.hidden_relu", NodeKind::relu, {}, {h});
  auto d = g.add("head.dropout", NodeKind::dropout, dropout_cfg(cfg.head_dropout), {hr});
  g.finish(g.add("head.dense", NodeKind::dense, dense_cfg(cfg.num_classes), {d}));
  g.initialize(cfg.seed);
  return g;
}

ModelGraph build_resnet_style(const BaselineConfig& cfg) {
  check_baseline(cfg);
  ModelGraph g(cfg.input_shape, "resnet");
  std::size_t x = conv_bn_relu(g, "stem", 0, cfg.width, 3);
  std::size_t channels = cfg.width;
  std::size_t filters = cfg.width;
  for (std::size_t s = 0; s < cfg.depth; ++s, filters *= 2) {
    const std::string stage = "stage" + std::to_string(s + 1);
    try {
      for (std::size_t b = 0; b < 2; ++b) {
        const std::string block = stage + ".block" + std::to_string(b + 1);
        const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
        auto r = conv_bn_relu(g, block + ".a", x, filters, 3, stride);
        auto c = g.add(block + ".b.conv", NodeKind::conv, conv_cfg(filters, 3), {r});
        auto bn = g.add(block + ".b.bn", NodeKind::batchnorm, {}, {c});
        std::size_t skip = x;
        if (stride != 1 || channels != filters) {
          skip = g.add(block + ".projection", NodeKind::conv, conv_cfg(filters, 1, stride), {x});
        }
        auto sum = g.add(block + ".add", NodeKind::add, {}, {bn, skip});
        x = g.add(block + ".relu", NodeKind::relu, {}, {sum});
        channels = filters;
      }
    } catch (const Error& e) {
      fail(e.kind(), "resnet " + stage + ": " + e.what());
    }
  }
  g.finish(classifier_head(g, x, cfg.head_dropout, cfg.num_classes));
  g.initialize(cfg.seed);
  return g;
}

ModelGraph build_mobilenet_style(const BaselineConfig& cfg) {
  check_baseline(cfg);
  ModelGraph g(cfg.input_shape, "mobilenet");
  std::size_t x = conv_bn_relu(g, "stem", 0, cfg.width, 3);
  std::size_t filters = cfg.width;
  for (std::size_t s = 0; s < cfg.depth; ++s, filters *= 2) {
    const std::string stage = "stage" + std::to_string(s + 1);
    try {
      NodeConfig dw = conv_cfg(0, 3, 2);
      auto d = g.add(stage + ".depthwise", NodeKind::depthwise, dw, {x});
      auto db = g.add(stage + ".depthwise_bn", NodeKind::batchnorm, {}, {d});
      auto dr = g.add(stage + ".depthwise_relu", NodeKind::relu, {}, {db});
      auto p = g.add(stage + ".pointwise", NodeKind::pointwise, dense_cfg(filters), {dr});
      auto pb = g.add(stage + ".pointwise_bn", NodeKind::batchnorm, {}, {p});
      x = g.add(stage + ".pointwise_relu", NodeKind::relu, {}, {pb});
    } catch (const Error& e) {
      fail(e.kind(), "mobilenet " + stage + ": " + e.what());
    }
  }
  g.finish(classifier_head(g, x, cfg.head_dropout, cfg.num_classes));
  g.initialize(cfg.seed);
  return g;
}

BaselineDefaults baseline_defaults(const std::string& name) {
  BaselineDefaults d;
  if (name == "resnet") d.depth = 4;
  return d;
}

ModelGraph build_model(const ModelSpec& spec) {
  if (spec.name == "mbinception") {
    MBInceptionConfig c;
    c.input_shape = spec.input_shape;
    c.base_filters = spec.base_filters;
    c.stage_multipliers = spec.stage_multipliers;
    c.num_classes = spec.num_classes;
    c.block_dropout = spec.block_dropout;
    c.head_dropout = spec.head_dropout;
    c.seed = spec.seed;
    return build_mbinception(c);
  }
  BaselineConfig b;
  b.input_shape = spec.input_shape;
  const BaselineDefaults defaults = baseline_defaults(spec.name);
  b.width = spec.width ? spec.width : defaults.width;
  b.depth = spec.depth ? spec.depth : defaults.depth;
  b.num_classes = spec.num_classes;
  b.head_dropout = spec.head_dropout;
  b.seed = spec.seed;
  if (spec.name == "vgg") return build_vgg_style(b);
  if (spec.name == "resnet") return build_resnet_style(b);
  if (spec.name == "mobilenet") return build_mobilenet_style(b);
  if (spec.name == "dense") {
    // Softmax regression on raw pixels; a reference point and a small
    // gradient-check target.
    ModelGraph g(spec.input_shape, "dense");
    const std::size_t flat = g.add("flatten", NodeKind::flatten, {}, {0});
    g.finish(g.add("dense", NodeKind::dense, dense_cfg(spec.num_classes), {flat}));
    g.initialize(spec.seed);
    return g;
  }
  fail(ErrorKind::usage,
       "unknown model '" + spec.name + "' (expected mbinception, vgg, resnet, mobilenet or dense)");
}

}  // namespace mbnet
