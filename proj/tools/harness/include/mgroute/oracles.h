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

// Brute-force references and builders used by the self test and the test
// suites. Everything here is deliberately naive.

#ifndef MGROUTE_ORACLES_H_
#define MGROUTE_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "mgroute/fsasp.h"
#include "mgroute/instance.h"
#include "mgroute/pareto.h"
#include "mgroute/rng.h"
#include "mgroute/tensor.h"

namespace mgroute::oracle {

// Complete multigraph whose pair (u, v) gets the edges returned by `fn`.
inline MultigraphInstance make_instance(
    int n, const std::function<std::vector<std::vector<double>>(int, int)>& fn,
    std::optional<NodeAttrs> attrs = std::nullopt) {
  MultigraphInstance::EdgeSets sets(static_cast<size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u != v) sets[u * n + v] = fn(u, v);
    }
  }
  return MultigraphInstance(n, 2, sets, std::move(attrs));
}

// Every pair gets the same list of edges.
inline MultigraphInstance uniform_instance(int n, const std::vector<std::vector<double>>& edges,
                                           std::optional<NodeAttrs> attrs = std::nullopt) {
  return make_instance(n, [&](int, int) { return edges; }, std::move(attrs));
}

// Random complete multigraph with 1..max_m edges per pair, attributes in [0, 1).
inline MultigraphInstance random_instance(int n, int max_m, uint64_t seed,
                                          std::optional<NodeAttrs> attrs = std::nullopt) {
  return make_instance(
      n,
      [&](int u, int v) {
        CounterRng rng(seed, {static_cast<uint64_t>(u), static_cast<uint64_t>(v)});
        const int m = 1 + static_cast<int>(rng.below(max_m));
        std::vector<std::vector<double>> edges;
        for (int l = 0; l < m; ++l) edges.push_back({rng.uniform(), rng.uniform()});
        return edges;
      },
      std::move(attrs));
}

// Random permutation of 0..n-1 (Fisher-Yates).
inline std::vector<int> random_permutation(int n, CounterRng& rng) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(i + 1)]);
  return p;
}

// Exhaustive edge selection over a fixed node sequence. Selections that
// break a hard constraint are skipped; returns +inf when none is left.
// A random fixed node sequence over a small multigraph carrying every kind
// of node attribute, so one generator serves all variants.
struct FsaspTrial {
  MultigraphInstance g;
  ProblemSpec spec;
  std::vector<int> nodes;
  Preference pref{std::vector<double>{1.0}};
  std::vector<double> ideal;  // empty for single-objective variants
};

inline FsaspTrial random_fsasp_trial(Variant v, uint64_t seed, int max_n = 6, int max_m = 4) {
  CounterRng rng(seed, {10});
  const int n = 3 + static_cast<int>(rng.below(max_n - 2));
  NodeAttrs attrs;
  attrs.windows.push_back({0, kInfinity});
  attrs.prize.push_back(0);
  attrs.demand.push_back(0);
  for (int i = 1; i < n; ++i) {
    const double o = rng.uniform(0, 1.5);
    attrs.windows.push_back({o, o + rng.uniform(0, 1)});
    attrs.prize.push_back(rng.uniform());
    attrs.demand.push_back(1.0);
  }
  FsaspTrial t{random_instance(n, max_m, seed ^ 0x5eedULL, attrs), {}, {0}, Preference({1.0}), {}};
  t.spec.variant = v;
  t.spec.capacity = 10;
  t.spec.resource_limit = t.spec.threshold1 = t.spec.threshold2 = rng.uniform(0.5, 2.5);
  const auto p = random_permutation(n - 1, rng);
  int k = n - 1;
  if (is_orienteering_variant(v)) k = 1 + static_cast<int>(rng.below(n - 1));
  for (int i = 0; i < k; ++i) t.nodes.push_back(p[i] + 1);
  t.nodes.push_back(0);
  if (is_multi_objective(v)) {
    t.pref = Preference::bi(rng.uniform());
    t.ideal = {0.0, 0.0};
  }
  return t;
}

struct EnumeratedOptimum {
  double cost = kInfinity;
  std::vector<int> edges;
  int feasible_count = 0;
};
inline EnumeratedOptimum enumerate_fsasp(const MultigraphInstance& g, const ProblemSpec& spec,
                                         const std::vector<int>& nodes, const Preference& pref,
                                         std::span<const double> ideal,
                                         Scalarization s = Scalarization::kChebyshev) {
  EnumeratedOptimum best;
  const size_t t = nodes.size() - 1;
  Route r{nodes, std::vector<int>(t, 0)};
  while (true) {
    auto eval = evaluate_route(g, spec, r);
    if (eval.feasible || !has_hard_edge_constraint(spec.variant)) {
      ++best.feasible_count;
      const double c = scalar_cost(eval, spec.variant, pref, ideal, s);
      if (c < best.cost) {
        best.cost = c;
        best.edges = r.edges;
      }
    }
    size_t i = 0;
    while (i < t && ++r.edges[i] == g.num_edges(nodes[i], nodes[i + 1])) r.edges[i++] = 0;
    if (i == t) break;
  }
  return best;
}

// Exhaustive tour optimum from the depot: every permutation of the
// customers, each with its optimal edge selection. +inf when no tour meets
// a hard constraint.
inline double brute_force_tour(const MultigraphInstance& g, const ProblemSpec& spec,
                               const Preference& pref, std::span<const double> ideal,
                               Scalarization s = Scalarization::kChebyshev) {
  const int n = g.num_nodes();
  std::vector<int> perm(n - 1);
  for (int i = 0; i < n - 1; ++i) perm[i] = i + 1;
  FsaspOptions options;
  options.scalarization = s;
  double best = kInfinity;
  do {
    std::vector<int> nodes{0};
    nodes.insert(nodes.end(), perm.begin(), perm.end());
    nodes.push_back(0);
    try {
      best = std::min(best, fsasp_dp(g, spec, nodes, pref, ideal, options).cost);
    } catch (const Infeasible&) {
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// |analytic - numeric| / max(|analytic| + |numeric|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

// Central-difference check of d loss / d leaf for every entry of every
// leaf. Returns the largest relative error.
struct GradWorst {
  size_t leaf = 0, entry = 0;
  double analytic = 0.0, numeric = 0.0, error = 0.0;
};

// `max_entries` > 0 checks only that many evenly spaced entries per leaf.
inline double gradient_check(const std::function<nn::Tensor()>& loss, std::vector<nn::Tensor> leaves,
                             double eps = 1e-6, double floor = 1e-6, size_t max_entries = 0,
                             GradWorst* where = nullptr) {
  for (auto& t : leaves) t.zero_grad();
  loss().backward();
  double worst = 0.0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    nn::Tensor& t = leaves[li];
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    analytic.resize(t.size(), 0.0);
    auto data = t.mutable_data();
    const size_t stride = max_entries > 0 ? std::max<size_t>(1, t.size() / max_entries) : 1;
    for (size_t i = 0; i < t.size(); i += stride) {
      const double keep = data[i];
      // Best of three steps: large ones can straddle a ReLU kink, small
      // ones drown in roundoff. A wrong gradient disagrees at all three.
      double numeric = 0.0, err = HUGE_VAL;
      for (double h : {eps, eps * 10.0, eps * 0.1}) {
        data[i] = keep + h;
        const double up = loss().item();
        data[i] = keep - h;
        const double down = loss().item();
        data[i] = keep;
        const double nd = (up - down) / (2 * h);
        const double e = relative_error(analytic[i], nd, floor);
        if (e < err) {
          err = e;
          numeric = nd;
        }
        if (err < 1e-7) break;
      }
      if (err > worst) {
        worst = err;
        if (where) *where = {li, i, analytic[i], numeric, err};
      }
    }
  }
  return worst;
}

inline std::vector<double> random_values(size_t n, CounterRng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace mgroute::oracle

#endif  // MGROUTE_ORACLES_H_
