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

// Small versions of the oracle, gradient and invariant suites, cheap enough
// to run from the command line on a fresh checkout.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mgroute/baselines.h"
#include "mgroute/harness.h"
#include "mgroute/oracles.h"
#include "mgroute/replay.h"
#include "mgroute/rng.h"

namespace mgroute::harness {

namespace {

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

CheckResult check_fsasp(uint64_t seed, int trials) {
  const Variant variants[] = {Variant::kMOTSP, Variant::kRCTSP, Variant::kMOTSPTW, Variant::kMOOP};
  int mismatches = 0, solved = 0;
  for (int t = 0; t < trials; ++t) {
    const auto trial = oracle::random_fsasp_trial(variants[t % 4], derive_key(seed, {1, static_cast<uint64_t>(t)}));
    const auto want = oracle::enumerate_fsasp(trial.g, trial.spec, trial.nodes, trial.pref, trial.ideal);
    try {
      const auto got = fsasp_dp(trial.g, trial.spec, trial.nodes, trial.pref, trial.ideal);
      if (want.feasible_count == 0 || got.cost != want.cost) ++mismatches;
      ++solved;
    } catch (const Infeasible&) {
      if (want.feasible_count != 0) ++mismatches;
    }
  }
  return {"fsasp_dp_vs_enumeration", mismatches == 0,
          std::to_string(trials) + " sequences, " + std::to_string(solved) + " feasible, " +
              std::to_string(mismatches) + " mismatches"};
}

CheckResult check_hypervolume(uint64_t seed, int trials) {
  const int grid = 400;
  double worst = 0.0;
  const std::vector<double> ref{1.0, 1.0};
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, {2, static_cast<uint64_t>(t)});
    std::vector<std::vector<double>> pts;
    const int k = 1 + static_cast<int>(rng.below(8));
    for (int i = 0; i < k; ++i) pts.push_back({rng.uniform(), rng.uniform()});
    const double hv = hypervolume_2d_raw(pts, ref);
    int covered = 0;
    for (int a = 0; a < grid; ++a) {
      for (int b = 0; b < grid; ++b) {
        const double x = (a + 0.5) / grid, y = (b + 0.5) / grid;
        for (const auto& p : pts) {
          if (p[0] <= x && p[1] <= y) {
            ++covered;
            break;
          }
        }
      }
    }
    worst = std::max(worst, std::abs(hv - static_cast<double>(covered) / (grid * grid)));
  }
  return {"hypervolume_vs_grid", worst < 5e-3, "max abs error " + fmt(worst) + " on " + std::to_string(trials) + " archives"};
}

MultigraphInstance with_sets(const MultigraphInstance& g, const MultigraphInstance::EdgeSets& sets) {
  return MultigraphInstance(g.num_nodes(), g.attr_dim(), sets, g.node_attrs());
}

CheckResult check_permutations(uint64_t seed, int trials) {
  double shuffle = 0.0, relabel = 0.0;
  NepfModel model(oracle::tiny_config(Variant::kMOTSP));
  for (int t = 0; t < trials; ++t) {
    GenConfig gc;
    gc.n = 6;
    gc.max_edges = 4;
    gc.seed = derive_key(seed, {3, static_cast<uint64_t>(t)});
    const MultigraphInstance g = generate(gc);
    ProblemSpec spec;
    CounterRng rng(gc.seed, {1});
    auto sets = g.edge_sets();
    for (auto& s : sets) {
      for (size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng.below(i)]);
    }
    const auto a = model.pre_encode(g, spec), b = model.pre_encode(with_sets(g, sets), spec);
    for (size_t i = 0; i < a.size(); ++i) shuffle = std::max(shuffle, std::abs(a.data()[i] - b.data()[i]));

    const int n = g.num_nodes();
    const auto pi = oracle::random_permutation(n, rng);
    const auto orig = g.edge_sets();
    MultigraphInstance::EdgeSets moved(orig.size());
    for (int u = 0; u < n; ++u) {
      for (int v = 0; v < n; ++v) moved[pi[u] * n + pi[v]] = orig[u * n + v];
    }
    const auto ha = model.encode_instance(g, spec).nodes, hb = model.encode_instance(with_sets(g, moved), spec).nodes;
    for (int u = 0; u < n; ++u) {
      for (int k = 0; k < ha.cols(); ++k) relabel = std::max(relabel, std::abs(ha.at(u, k) - hb.at(pi[u], k)));
    }
  }
  return {"permutation_properties", shuffle <= 1e-12 && relabel <= 1e-9,
          "edge shuffle " + fmt(shuffle) + ", node relabel " + fmt(relabel)};
}

CheckResult check_gradients(uint64_t seed) {
  double worst = 0.0;
  for (Variant v : {Variant::kRCTSP, Variant::kMOOP}) {
    GenConfig gc;
    gc.variant = v;
    gc.n = 10;
    gc.seed = seed;
    // Thresholds from the larger size are merely loose at n = 5.
    const ProblemSpec spec = calibrate_thresholds(gc, 20);
    gc.n = 5;
    const MultigraphInstance g = generate(gc);
    NepfModel model(oracle::tiny_config(v));
    const Preference pref = is_multi_objective(v) ? Preference::bi(0.5) : Preference::bi(1.0);
    const auto replay = oracle::sample_replay(model, g, spec, pref, 0, 3, seed);
    std::vector<nn::Tensor> leaves;
    for (size_t i = 0; i < model.params().size(); ++i) leaves.push_back(model.params()[i]);
    worst = std::max(worst, oracle::gradient_check([&] { return oracle::replay_loss(model, g, spec, pref, replay); },
                                                   leaves, 1e-6, 1e-6, 3));
  }
  return {"policy_gradient_finite_differences", worst < 1e-4, "max relative error " + fmt(worst)};
}

CheckResult check_advantages(uint64_t seed, int trials) {
  bool ok = true;
  for (int t = 0; t < trials && ok; ++t) {
    CounterRng rng(seed, {4, static_cast<uint64_t>(t)});
    const int k1 = 1 + static_cast<int>(rng.below(10)), k2 = 1 + static_cast<int>(rng.below(8));
    std::vector<std::vector<double>> r(k1);
    for (int j = 0; j < k1; ++j) {
      const double level = rng.uniform(-20, 0);
      for (int k = 0; k < k2; ++k) r[j].push_back(j % 2 ? level : rng.uniform(-20, 0));
    }
    const Advantages a = compute_advantages(r);
    ok = std::abs(a.node_sum) <= 1e-12 * k1 * 20;
    for (int j = 1; j < k1; j += 2) {
      for (double x : a.edge[j]) ok = ok && x == 0.0;
    }
  }
  return {"reinforce_identities", ok, std::to_string(trials) + " reward tables"};
}

CheckResult check_orienteering(uint64_t seed, int trials) {
  int bad = 0;
  for (Variant v : {Variant::kOP, Variant::kMOOP}) {
    GenConfig gc;
    gc.variant = v;
    gc.n = 20;
    gc.seed = seed;
    const ProblemSpec spec = calibrate_thresholds(gc, 20);
    for (int t = 0; t < trials; ++t) {
      gc.seed = derive_key(seed, {5, static_cast<uint64_t>(t)});
      const MultigraphInstance g = generate(gc);
      const Route r = v == Variant::kOP ? greedy_op(g, spec) : greedy_moop(g, spec, Preference::bi(0.5));
      if (evaluate_route(g, spec, r).violation != 0.0) ++bad;
    }
  }
  return {"orienteering_feasibility", bad == 0, std::to_string(2 * trials) + " instances, " + std::to_string(bad) + " violations"};
}

}  // namespace

std::vector<CheckResult> run_selftest(uint64_t seed, int scale) {
  scale = std::max(1, scale);
  return {check_fsasp(seed, 200 * scale),       check_hypervolume(seed, 10 * scale),
          check_permutations(seed, 5 * scale),  check_gradients(seed),
          check_advantages(seed, 200 * scale),  check_orienteering(seed, 25 * scale)};
}

}  // namespace mgroute::harness
