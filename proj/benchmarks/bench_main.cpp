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


#include <benchmark/benchmark.h>

#include <random>

#include "mbnet/graph.hpp"
#include "mbnet/models.hpp"
#include "mbnet/ops.hpp"
#include "mbnet/optim.hpp"

namespace {

using namespace mbnet;

Tensor uniform(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : t.data()) v = u(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = uniform({n, n}, 1), b = uniform({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

// 3x3 same conv on a [16, side, side, c] batch, c -> c channels.
void BM_ConvForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0)), c = static_cast<std::size_t>(state.range(1));
  const Tensor x = uniform({16, side, side, c}, 1), k = uniform({3, 3, c, c}, 2), b = uniform({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d_forward(x, k, b, {}));
}
BENCHMARK(BM_ConvForward)->Args({32, 8})->Args({16, 32})->Args({8, 64});

void BM_ConvBackward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0)), c = static_cast<std::size_t>(state.range(1));
  const Tensor x = uniform({16, side, side, c}, 1), k = uniform({3, 3, c, c}, 2), b = uniform({c}, 3);
  ops::ConvContext ctx;
  const Tensor y = ops::conv2d_forward(x, k, b, {}, &ctx);
  const Tensor g = uniform(y.shape(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d_backward(ctx, g));
}
BENCHMARK(BM_ConvBackward)->Args({32, 8})->Args({16, 32})->Args({8, 64});

void BM_DepthwiseForward(benchmark::State& state) {
  const Tensor x = uniform({16, 16, 16, 32}, 1), k = uniform({3, 3, 32, 1}, 2), b = uniform({32}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ops::depthwise_conv2d_forward(x, k, b, {}));
}
BENCHMARK(BM_DepthwiseForward);

// One optimizer step of a default-size model on a [batch, 32, 32, 3] batch:
// forward, backward and a NADAM update.
void BM_TrainStep(benchmark::State& state, const char* name) {
  ModelSpec spec;
  spec.name = name;
  spec.seed = 1;
  ModelGraph model = build_model(spec);
  const auto batch = static_cast<std::size_t>(state.range(0));
  const Tensor x = uniform({batch, 32, 32, 3}, 5);
  std::vector<int> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(i % 10);
  Nadam optimizer;
  ops::Rng rng(7);
  for (auto _ : state) {
    const ForwardPass fwd = graph_forward(model, x, ops::Mode::train, rng);
    const BackwardPass bwd = graph_backward(model, fwd, labels);
    apply_updates(model.parameters(), bwd.grads, optimizer);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK_CAPTURE(BM_TrainStep, mbinception, "mbinception")->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainStep, vgg, "vgg")->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainStep, resnet, "resnet")->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainStep, mobilenet, "mobilenet")->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  ModelSpec spec;
  spec.seed = 1;
  const ModelGraph model = build_model(spec);
  const Tensor x = uniform({250, 32, 32, 3}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(graph_predict(model, x));
  state.SetItemsProcessed(state.iterations() * 250);
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
