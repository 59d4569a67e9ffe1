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

#include "mgroute/fsasp.h"

#include <algorithm>
#include <numeric>

#include "mgroute/baselines.h"

namespace mgroute {

double scalar_cost(const RouteEvaluation& eval, Variant variant, const Preference& pref,
                   std::span<const double> ideal, Scalarization scalarization) {
  if (!is_multi_objective(variant)) return eval.objectives[0];
  if (scalarization == Scalarization::kLinear) return linear_cost(eval.objectives, pref);
  return chebyshev_cost(eval.objectives, pref, ideal);
}

bool has_hard_edge_constraint(Variant variant) {
  return variant == Variant::kRCTSP || variant == Variant::kOP;
}

namespace {

// Labels of one DP layer, stored flat. Key layout: [late count (time
// windows only), attribute sums...]; smaller is better in every component.
struct Layer {
  int key_dim = 0;
  std::vector<double> keys;
  std::vector<int> parent;
  std::vector<int> edge;

  size_t size() const { return parent.size(); }
  const double* key(size_t i) const { return keys.data() + i * key_dim; }
};

bool key_weakly_dominates(const double* a, const double* b, int dim) {
  for (int i = 0; i < dim; ++i) {
    if (a[i] > b[i]) return false;
  }
  return true;
}

Layer select(const Layer& in, const std::vector<size_t>& keep) {
  Layer out;
  out.key_dim = in.key_dim;
  out.keys.reserve(keep.size() * in.key_dim);
  for (size_t i : keep) {
    out.keys.insert(out.keys.end(), in.key(i), in.key(i) + in.key_dim);
    out.parent.push_back(in.parent[i]);
    out.edge.push_back(in.edge[i]);
  }
  return out;
}

// Keeps labels not weakly dominated by an earlier-kept label; equal keys
// keep the label generated first.
Layer prune_dominated(const Layer& in) {
  const int dim = in.key_dim;
  std::vector<size_t> order(in.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return std::lexicographical_compare(in.key(a), in.key(a) + dim, in.key(b), in.key(b) + dim);
  });
  std::vector<size_t> keep;
  if (dim == 2) {
    double best_second = kInfinity;
    for (size_t i : order) {
      if (in.key(i)[1] >= best_second) continue;
      best_second = in.key(i)[1];
      keep.push_back(i);
    }
  } else {
    for (size_t i : order) {
      bool dominated = false;
      for (size_t j : keep) {
        if (key_weakly_dominates(in.key(j), in.key(i), dim)) {
          dominated = true;
          break;
        }
      }
      if (!dominated) keep.push_back(i);
    }
  }
  std::sort(keep.begin(), keep.end());
  return select(in, keep);
}

// Rough scalarisation of a partial label, used only to rank labels when the
// cap is exceeded.
double partial_score(const double* key, Variant variant, const Preference& pref) {
  switch (variant) {
    case Variant::kMOTSP:
    case Variant::kMOCVRP: return std::max(pref[0] * key[0], pref[1] * key[1]);
    case Variant::kMOTSPTW: return std::max(pref[0] * key[0], pref[1] * key[1]);
    case Variant::kMOOP: return pref[1] * key[0] + 1e-3 * key[1];
    default: return key[0] + 1e-3 * key[1];
  }
}

}  // namespace

FsaspResult fsasp_dp(const MultigraphInstance& instance, const ProblemSpec& spec,
                     std::span<const int> nodes, const Preference& pref,
                     std::span<const double> ideal, const FsaspOptions& options) {
  const Variant variant = spec.variant;
  check_node_attrs(instance, variant);
  validate_node_sequence(instance, variant, nodes);
  FsaspResult result;
  if (nodes.size() < 2) {
    result.cost = scalar_cost(evaluate_route(instance, spec, Route{{nodes.begin(), nodes.end()}, {}}),
                              variant, pref, ideal, options.scalarization);
    return result;
  }

  const bool windows = variant == Variant::kMOTSPTW;
  const int k = instance.attr_dim();
  const int offset = windows ? 1 : 0;
  Layer layer;
  layer.key_dim = k + offset;
  layer.keys.assign(layer.key_dim, 0.0);
  layer.parent.push_back(-1);
  layer.edge.push_back(-1);
  std::vector<Layer> layers;
  layers.reserve(nodes.size());

  for (size_t t = 0; t + 1 < nodes.size(); ++t) {
    const int u = nodes[t];
    const int v = nodes[t + 1];
    const int m = instance.num_edges(u, v);
    Layer next;
    next.key_dim = layer.key_dim;
    next.keys.reserve(layer.size() * m * next.key_dim);
    std::vector<double> key(next.key_dim);
    for (size_t i = 0; i < layer.size(); ++i) {
      for (int l = 0; l < m; ++l) {
        std::copy(layer.key(i), layer.key(i) + next.key_dim, key.begin());
        auto e = instance.edge(u, v, l);
        for (int a = 0; a < k; ++a) key[offset + a] += e[a];
        if (windows && v != kDepot &&
            key[offset + 1] > instance.node_attrs()->windows[v].close) {
          key[0] += 1.0;
        }
        if (variant == Variant::kRCTSP && key[1] > spec.resource_limit) continue;
        if (variant == Variant::kOP &&
            (key[0] > spec.threshold1 || key[1] > spec.threshold2)) {
          continue;
        }
        next.keys.insert(next.keys.end(), key.begin(), key.end());
        next.parent.push_back(static_cast<int>(i));
        next.edge.push_back(l);
      }
    }
    if (next.size() == 0) {
      throw Infeasible("no edge selection satisfies the route constraints");
    }
    if (options.prune) next = prune_dominated(next);
    if (next.size() > options.label_cap) {
      std::vector<size_t> order(next.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return partial_score(next.key(a), variant, pref) < partial_score(next.key(b), variant, pref);
      });
      order.resize(options.label_cap);
      std::sort(order.begin(), order.end());
      next = select(next, order);
      result.approximate = true;
    }
    result.max_labels = std::max(result.max_labels, next.size());
    layers.push_back(std::move(layer));
    layer = std::move(next);
  }
  layers.push_back(std::move(layer));

  const size_t positions = nodes.size() - 1;
  Route route{{nodes.begin(), nodes.end()}, std::vector<int>(positions)};
  double best = kInfinity;
  const Layer& last = layers.back();
  for (size_t i = 0; i < last.size(); ++i) {
    int idx = static_cast<int>(i);
    for (size_t t = positions; t-- > 0;) {
      route.edges[t] = layers[t + 1].edge[idx];
      idx = layers[t + 1].parent[idx];
    }
    const double cost =
        scalar_cost(evaluate_route(instance, spec, route), variant, pref, ideal, options.scalarization);
    if (cost < best) {
      best = cost;
      result.edges = route.edges;
    }
  }
  result.cost = best;
  return result;
}

std::vector<int> fsasp_greedy_linear(const MultigraphInstance& instance,
                                     std::span<const int> nodes, const Preference& pref) {
  if (static_cast<int>(pref.size()) != instance.attr_dim()) {
    throw DimMismatch("preference size must equal attr_dim");
  }
  std::vector<int> edges;
  edges.reserve(nodes.size() > 0 ? nodes.size() - 1 : 0);
  for (size_t t = 0; t + 1 < nodes.size(); ++t) {
    edges.push_back(cheapest_edge(instance, nodes[t], nodes[t + 1], pref.weights()));
  }
  return edges;
}

GapStudyResult fsasp_gap_study(const std::vector<MultigraphInstance>& instances,
                               const ProblemSpec& spec, const std::vector<Preference>& grid,
                               const PermutationSource& source) {
  if (!is_multi_objective(spec.variant)) {
    throw std::invalid_argument("gap study needs a bi-objective variant");
  }
  const std::vector<double> ideal(spec.objective_dim(), 0.0);
  GapStudyResult out;
  for (size_t i = 0; i < instances.size(); ++i) {
    const auto& g = instances[i];
    ParetoArchive greedy_front(spec.objective_dim());
    ParetoArchive dp_front(spec.objective_dim());
    for (const auto& pref : grid) {
      const std::vector<int> nodes =
          source ? source(g, pref) : nearest_neighbor(g, spec, pref).nodes;
      Route greedy{nodes, fsasp_greedy_linear(g, nodes, pref)};
      const RouteEvaluation greedy_eval = evaluate_route(g, spec, greedy);
      const FsaspResult dp = fsasp_dp(g, spec, nodes, pref, ideal);
      const RouteEvaluation dp_eval = evaluate_route(g, spec, Route{nodes, dp.edges});
      GapRecord rec;
      rec.instance = static_cast<int>(i);
      rec.lambda1 = pref[0];
      rec.greedy_cost = chebyshev_cost(greedy_eval.objectives, pref, ideal);
      rec.dp_cost = dp.cost;
      rec.gap = rec.dp_cost > 0.0 ? (rec.greedy_cost - rec.dp_cost) / rec.dp_cost : 0.0;
      out.cells.push_back(rec);
      // Points beyond the reference box add no volume.
      if (weakly_dominates(greedy_eval.objectives, spec.hv_reference)) greedy_front.insert(greedy_eval.objectives);
      if (weakly_dominates(dp_eval.objectives, spec.hv_reference)) dp_front.insert(dp_eval.objectives);
    }
    out.hv_difference.push_back(hypervolume_2d(greedy_front, spec.hv_reference) -
                                hypervolume_2d(dp_front, spec.hv_reference));
  }
  return out;
}

}  // namespace mgroute
