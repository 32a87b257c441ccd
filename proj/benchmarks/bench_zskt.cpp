/* Copyright 2026 The zskt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <benchmark/benchmark.h>

#include "zskt/autodiff.hpp"
#include "zskt/checkpoint.hpp"
#include "zskt/engine.hpp"
#include "zskt/losses.hpp"
#include "zskt/nn.hpp"
#include "zskt/ops.hpp"
#include "zskt/probe.hpp"
#include "zskt/random.hpp"

namespace {

using namespace zskt;

NetSpec mnist_mlp(std::vector<std::size_t> widths) {
  NetSpec s;
  s.kind = NetKind::kMlp;
  s.input_shape = {1, 28, 28};
  s.classes = 10;
  s.widths = std::move(widths);
  return s;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = normal_tensor({n, n}, rng), b = normal_tensor({n, n}, rng);
  for (auto _ : state) {
    Graph g(false);
    benchmark::DoNotOptimize(matmul(g.constant(a), g.constant(b)).value().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor x = normal_tensor({16, c, 14, 14}, rng), w = normal_tensor({c, c, 3, 3}, rng);
  const Tensor bias(Shape{c});
  for (auto _ : state) {
    Graph g;
    Var wv = g.variable(w);
    Var y = conv2d(g.variable(x), wv, g.variable(bias), 1, 1);
    benchmark::DoNotOptimize(g.backward(sum(square(y)))[wv].data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(8)->Arg(32);

// One student update's worth of work for the MNIST teacher architecture.
void BM_MlpForwardBackward(benchmark::State& state) {
  Network net = build_network(mnist_mlp({512, 512}), 3);
  Rng rng(3);
  const Tensor x = normal_tensor({64, 1, 28, 28}, rng);
  for (auto _ : state) {
    Graph g;
    const auto params = net.bind(g, true);
    const ForwardVars f = net.forward(g, g.constant(x), params, {true, false});
    benchmark::DoNotOptimize(g.backward(sum(square(f.output)))[params[0]].data());
  }
}
BENCHMARK(BM_MlpForwardBackward)->Unit(benchmark::kMillisecond);

void BM_GeneratorForwardBackward(benchmark::State& state) {
  const auto ch = static_cast<std::size_t>(state.range(0));
  Network gen = build_network(generator_spec(100, {1, 28, 28}, ch, true, -0.5, 2.8), 4);
  Rng rng(4);
  const Tensor z = normal_tensor({64, 100}, rng);
  for (auto _ : state) {
    Graph g;
    const auto params = gen.bind(g, true);
    const ForwardVars f = gen.forward(g, g.constant(z), params, {true, false});
    benchmark::DoNotOptimize(g.backward(sum(square(f.output)))[params[0]].data());
  }
}
BENCHMARK(BM_GeneratorForwardBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// One outer iteration: a generator step plus n_S student steps.
void BM_ZeroShotIteration(benchmark::State& state) {
  Network teacher = build_network(mnist_mlp({512, 512}), 5);
  ZeroShotConfig cfg;
  cfg.iterations = 1;
  cfg.batch = 64;
  const NetSpec gen = generator_spec(cfg.z_dim, {1, 28, 28}, 32, true, -0.5, 2.8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_zero_shot(teacher, mnist_mlp({128, 128}), gen, cfg).student_updates);
  }
}
BENCHMARK(BM_ZeroShotIteration)->Unit(benchmark::kMillisecond);

void BM_TransitionCurves(benchmark::State& state) {
  Network a = build_network(mnist_mlp({128, 128}), 6);
  Network b = build_network(mnist_mlp({512, 512}), 6);
  Dataset test;
  Rng rng(6);
  test.inputs = normal_tensor({8, 1, 28, 28}, rng);
  test.classes = 10;
  const auto labels = argmax_rows(b.predict(test.inputs));
  test.labels = labels;
  ProbeConfig cfg;
  cfg.k = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(transition_curves(a, a, test, cfg).curves.size());
  }
}
BENCHMARK(BM_TransitionCurves)->Unit(benchmark::kMillisecond);

void BM_CheckpointEncode(benchmark::State& state) {
  const Network net = build_network(mnist_mlp({512, 512}), 7);
  for (auto _ : state) {
    const auto recs = network_records(net);
    benchmark::DoNotOptimize(encode_records(recs).size());
  }
}
BENCHMARK(BM_CheckpointEncode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
