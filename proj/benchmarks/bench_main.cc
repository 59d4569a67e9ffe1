// Copyright 2026 The mgroute Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <numeric>

#include "mgroute/fsasp.h"
#include "mgroute/instancegen.h"
#include "mgroute/model.h"
#include "mgroute/pareto.h"
#include "mgroute/rng.h"
#include "mgroute/tensor.h"

namespace {

using namespace mgroute;

MultigraphInstance motsp(int n, int m, uint64_t seed = 1) {
  GenConfig g;
  g.variant = Variant::kMOTSP;
  g.n = n;
  g.max_edges = m;
  g.seed = seed;
  return generate(g);
}

ModelConfig bench_config() {
  ModelConfig c = ModelConfig::for_variant(Variant::kMOTSP);
  c.d = 64;
  c.d_edge = 32;
  c.heads = 4;
  c.ffn_hidden = 128;
  return c;
}

// args: nodes, max parallel edges
void BM_FsaspDp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto g = motsp(n, static_cast<int>(state.range(1)));
  ProblemSpec spec;
  spec.variant = Variant::kMOTSP;
  std::vector<int> nodes(n);
  std::iota(nodes.begin(), nodes.end(), 0);
  nodes.push_back(0);
  const std::vector<double> ideal{0.0, 0.0};
  size_t labels = 0;
  for (auto _ : state) {
    const auto r = fsasp_dp(g, spec, nodes, Preference::bi(0.5), ideal);
    labels = r.max_labels;
    benchmark::DoNotOptimize(r.cost);
  }
  state.counters["max_labels"] = static_cast<double>(labels);
}
BENCHMARK(BM_FsaspDp)->Args({20, 2})->Args({50, 2})->Args({50, 5})->Args({100, 5})->Unit(benchmark::kMicrosecond);

void BM_Encoder(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto g = motsp(n, 5);
  ProblemSpec spec;
  spec.variant = Variant::kMOTSP;
  const NepfModel model(bench_config());
  nn::NoGradGuard no_grad;
  for (auto _ : state) {
    auto enc = model.encode_instance(g, spec);
    benchmark::DoNotOptimize(enc.nodes.data()[0]);
  }
}
BENCHMARK(BM_Encoder)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_GreedyRollout(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto g = motsp(n, 5);
  ProblemSpec spec;
  spec.variant = Variant::kMOTSP;
  const NepfModel model(bench_config());
  nn::NoGradGuard no_grad;
  const auto enc = model.encode_instance(g, spec);
  const Preference pref = Preference::bi(0.5);
  const auto w = model.pointer_weights(pref);
  RolloutOptions o;
  o.greedy = true;
  for (auto _ : state) {
    auto r = model.rollout(enc, g, spec, pref, w, o);
    benchmark::DoNotOptimize(r.routes.data());
  }
  state.counters["starts"] = n - 1;
}
BENCHMARK(BM_GreedyRollout)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Hypervolume(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  CounterRng rng(3, {});
  ParetoArchive archive(2);
  for (int i = 0; i < k; ++i) {
    const double x = rng.uniform();
    archive.insert(std::vector<double>{x, 1.0 - x});
  }
  const std::vector<double> ref{1.0, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(hypervolume_2d(archive, ref));
  state.counters["points"] = static_cast<double>(archive.size());
}
BENCHMARK(BM_Hypervolume)->Arg(10)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
