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

// Forward and backward kernels for every layer kind the model zoo uses.
//
// Image tensors are NHWC. Each forward optionally fills a context holding
// whatever its backward needs; a context must only be handed to the backward
// of the op that produced it.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mbnet/tensor.hpp"

namespace mbnet::ops {

using Rng = std::mt19937_64;

enum class Mode { train, infer };
enum class Padding { same, valid };

/// Output extent and leading padding of a sliding window along one axis.
/// Same padding yields ceil(in/stride) with any odd padding at the end;
/// valid padding yields floor((in-k)/stride)+1.
struct WindowGeometry {
  std::size_t out = 0;
  std::size_t pad_before = 0;
};
WindowGeometry window_geometry(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding);

// ---------------------------------------------------------------- conv2d

struct ConvConfig {
  std::size_t stride = 1;
  Padding padding = Padding::same;
};

struct ConvContext {
  Tensor input;
  Tensor kernel;
  ConvConfig config;
};

struct ConvGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;
};

/// kernel [kh,kw,c_in,c_out], bias [c_out].
Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias, ConvConfig config,
                      ConvContext* ctx = nullptr);
ConvGrads conv2d_backward(const ConvContext& ctx, const Tensor& grad_out);

/// 1x1, stride-1 convolution: mixes channels only.
Tensor pointwise_conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                                ConvContext* ctx = nullptr);
ConvGrads pointwise_conv2d_backward(const ConvContext& ctx, const Tensor& grad_out);

/// One spatial filter per input channel, no cross-channel mixing.
/// kernel [kh,kw,C,1], bias [C].
Tensor depthwise_conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                                ConvConfig config, ConvContext* ctx = nullptr);
ConvGrads depthwise_conv2d_backward(const ConvContext& ctx, const Tensor& grad_out);

// ------------------------------------------------------------- batchnorm

struct BatchNormConfig {
  Mode mode = Mode::train;
  double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double eps = 1e-5;
};

struct BatchNormContext {
  Tensor normalized;             // x-hat
  std::vector<double> inv_std;   // per channel
  Tensor gamma;
  Mode mode = Mode::train;
};

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

/// Normalizes over every axis but the last (channels). Train mode uses the
/// biased batch variance and updates the running statistics in place; infer
/// mode reads them.
Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                         Tensor& running_var, BatchNormConfig config, BatchNormContext* ctx = nullptr);
BatchNormGrads batchnorm_backward(const BatchNormContext& ctx, const Tensor& grad_out);

// ------------------------------------------------------------------ relu

struct ReluContext {
  Tensor input;
};

Tensor relu_forward(const Tensor& x, ReluContext* ctx = nullptr);
/// Subgradient at exactly 0 is 0.
Tensor relu_backward(const ReluContext& ctx, const Tensor& grad_out);

// --------------------------------------------------------------- maxpool

struct PoolConfig {
  std::size_t pool = 2;
  std::size_t stride = 2;
  Padding padding = Padding::valid;  // same padding pads with -inf
};

struct PoolContext {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Ties resolve to the first maximum in row-major window order.
Tensor maxpool2d_forward(const Tensor& x, PoolConfig config, PoolContext* ctx = nullptr);
Tensor maxpool2d_backward(const PoolContext& ctx, const Tensor& grad_out);

// --------------------------------------------------------------- dropout

struct DropoutContext {
  Tensor mask;  // 0 or 1/(1-rate) per element; empty in infer mode
};

/// Inverted dropout. Infer mode and rate 0 are exact identities.
Tensor dropout_forward(const Tensor& x, double rate, Rng& rng, Mode mode, DropoutContext* ctx = nullptr);
Tensor dropout_backward(const DropoutContext& ctx, const Tensor& grad_out);

// ----------------------------------------------------------------- dense

struct DenseContext {
  Tensor input;
  Tensor weight;
};

struct DenseGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

/// x [N,d_in], weight [d_in,d_out], bias [d_out].
Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias, DenseContext* ctx = nullptr);
DenseGrads dense_backward(const DenseContext& ctx, const Tensor& grad_out);

// ------------------------------------------------------------------ loss

struct SoftmaxCrossEntropy {
  double loss = 0.0;        // mean over the batch
  Tensor grad_logits;       // (softmax - onehot) / N
  Tensor probabilities;     // row-wise softmax
};

SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace mbnet::ops
