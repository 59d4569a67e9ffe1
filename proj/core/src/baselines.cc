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

#include "mgroute/baselines.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "mgroute/fsasp.h"

namespace mgroute {
namespace {

void require_variant(const ProblemSpec& spec, std::initializer_list<Variant> allowed,
                     const char* who) {
  for (Variant v : allowed) {
    if (spec.variant == v) return;
  }
  throw std::invalid_argument(std::string(who) + ": unsupported variant " +
                              std::string(variant_name(spec.variant)));
}

}  // namespace

Route nearest_neighbor(const MultigraphInstance& instance, const ProblemSpec& spec,
                       const Preference& pref) {
  require_variant(spec, {Variant::kMOTSP, Variant::kMOCVRP}, "nearest_neighbor");
  check_node_attrs(instance, spec.variant);
  const int n = instance.num_nodes();
  const auto cheap = cheapest_edge_matrix(instance, pref.weights());
  std::vector<char> visited(n, 0);
  visited[kDepot] = 1;
  std::vector<int> nodes = {kDepot};
  int cur = kDepot;
  int remaining = n - 1;
  double load = 0.0;
  const bool cvrp = spec.variant == Variant::kMOCVRP;
  while (remaining > 0) {
    int best = -1;
    for (int v = 1; v < n; ++v) {
      if (visited[v]) continue;
      if (cvrp && load + instance.node_attrs()->demand[v] > spec.capacity) continue;
      if (best < 0 || cheap[static_cast<size_t>(cur) * n + v] <
                          cheap[static_cast<size_t>(cur) * n + best]) {
        best = v;
      }
    }
    if (best < 0) {
      if (cur == kDepot) throw std::invalid_argument("customer demand exceeds capacity");
      nodes.push_back(kDepot);
      cur = kDepot;
      load = 0.0;
      continue;
    }
    visited[best] = 1;
    --remaining;
    if (cvrp) load += instance.node_attrs()->demand[best];
    nodes.push_back(best);
    cur = best;
  }
  nodes.push_back(kDepot);
  Route route{nodes, fsasp_greedy_linear(instance, nodes, pref)};
  return route;
}

namespace {

struct BeamState {
  std::vector<int> nodes;
  std::vector<int> edges;
  std::vector<char> visited;
  double cost = 0.0;
  double resource = 0.0;
};

// Lowers resource by swapping single edges, best resource saving per unit of
// added cost first, until the tour fits the limit or no swap helps.
void repair_resource(const MultigraphInstance& instance, double limit, BeamState& tour) {
  while (tour.resource > limit) {
    double best_ratio = -1.0;
    size_t best_pos = 0;
    int best_edge = -1;
    for (size_t t = 0; t < tour.edges.size(); ++t) {
      const int u = tour.nodes[t];
      const int v = tour.nodes[t + 1];
      auto cur = instance.edge(u, v, tour.edges[t]);
      for (int l = 0; l < instance.num_edges(u, v); ++l) {
        auto alt = instance.edge(u, v, l);
        const double saving = cur[1] - alt[1];
        if (saving <= 0.0) continue;
        const double extra = std::max(alt[0] - cur[0], 0.0);
        const double ratio = saving / (extra + 1e-12);
        if (ratio > best_ratio) {
          best_ratio = ratio;
          best_pos = t;
          best_edge = l;
        }
      }
    }
    if (best_edge < 0) return;
    const int u = tour.nodes[best_pos];
    const int v = tour.nodes[best_pos + 1];
    auto cur = instance.edge(u, v, tour.edges[best_pos]);
    auto alt = instance.edge(u, v, best_edge);
    tour.cost += alt[0] - cur[0];
    tour.resource += alt[1] - cur[1];
    tour.edges[best_pos] = best_edge;
  }
}

BeamState run_beam(const MultigraphInstance& instance, double limit, double mu, int width) {
  const int n = instance.num_nodes();
  BeamState start;
  start.nodes = {kDepot};
  start.visited.assign(n, 0);
  start.visited[kDepot] = 1;
  std::vector<BeamState> beam = {start};
  auto score = [&](const BeamState& s) { return s.cost + mu * s.resource; };

  for (int step = 1; step < n; ++step) {
    std::vector<BeamState> candidates;
    for (const auto& s : beam) {
      const int u = s.nodes.back();
      for (int v = 0; v < n; ++v) {
        if (s.visited[v]) continue;
        for (int l = 0; l < instance.num_edges(u, v); ++l) {
          auto e = instance.edge(u, v, l);
          if (s.resource + e[1] > limit) continue;
          BeamState next = s;
          next.nodes.push_back(v);
          next.edges.push_back(l);
          next.visited[v] = 1;
          next.cost += e[0];
          next.resource += e[1];
          candidates.push_back(std::move(next));
        }
      }
    }
    if (candidates.empty()) {
      // Every extension breaks the limit: continue on the Lagrangian score
      // alone and let the repair step deal with the excess.
      for (const auto& s : beam) {
        const int u = s.nodes.back();
        for (int v = 0; v < n; ++v) {
          if (s.visited[v]) continue;
          const int l = [&] {
            int best = 0;
            double best_score = kInfinity;
            for (int k = 0; k < instance.num_edges(u, v); ++k) {
              auto e = instance.edge(u, v, k);
              if (e[0] + mu * e[1] < best_score) {
                best_score = e[0] + mu * e[1];
                best = k;
              }
            }
            return best;
          }();
          auto e = instance.edge(u, v, l);
          BeamState next = s;
          next.nodes.push_back(v);
          next.edges.push_back(l);
          next.visited[v] = 1;
          next.cost += e[0];
          next.resource += e[1];
          candidates.push_back(std::move(next));
        }
      }
    }
    // Dominance among states sharing the last node and visited set.
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < candidates.size(); ++i) {
      std::string key(candidates[i].visited.begin(), candidates[i].visited.end());
      key.push_back(static_cast<char>(candidates[i].nodes.back() & 0x7f));
      key.push_back(static_cast<char>(candidates[i].nodes.back() >> 7));
      groups[key].push_back(i);
    }
    std::vector<char> dominated(candidates.size(), 0);
    for (const auto& [key, members] : groups) {
      for (size_t a : members) {
        for (size_t b : members) {
          if (a == b || dominated[b]) continue;
          const auto& x = candidates[a];
          const auto& y = candidates[b];
          const bool weak = y.cost <= x.cost && y.resource <= x.resource;
          const bool strict = y.cost < x.cost || y.resource < x.resource;
          if (weak && (strict || b < a)) {
            dominated[a] = 1;
            break;
          }
        }
      }
    }
    std::vector<size_t> order;
    for (size_t i = 0; i < candidates.size(); ++i) {
      if (!dominated[i]) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return score(candidates[a]) < score(candidates[b]);
    });
    if (static_cast<int>(order.size()) > width) order.resize(width);
    std::vector<BeamState> next_beam;
    next_beam.reserve(order.size());
    for (size_t i : order) next_beam.push_back(std::move(candidates[i]));
    beam = std::move(next_beam);
  }

  // Close every tour with its best return edge.
  BeamState best_feasible, best_any;
  bool have_feasible = false, have_any = false;
  for (auto& s : beam) {
    const int u = s.nodes.back();
    int chosen = -1;
    double chosen_score = kInfinity;
    for (int l = 0; l < instance.num_edges(u, kDepot); ++l) {
      auto e = instance.edge(u, kDepot, l);
      if (s.resource + e[1] > limit) continue;
      if (e[0] + mu * e[1] < chosen_score) {
        chosen_score = e[0] + mu * e[1];
        chosen = l;
      }
    }
    if (chosen < 0) {
      chosen = cheapest_edge(instance, u, kDepot, std::vector<double>{0.0, 1.0});
    }
    auto e = instance.edge(u, kDepot, chosen);
    s.nodes.push_back(kDepot);
    s.edges.push_back(chosen);
    s.cost += e[0];
    s.resource += e[1];
    if (s.resource <= limit) {
      if (!have_feasible || s.cost < best_feasible.cost) {
        best_feasible = s;
        have_feasible = true;
      }
    }
    if (!have_any || score(s) < score(best_any)) {
      best_any = s;
      have_any = true;
    }
  }
  if (have_feasible) return best_feasible;
  repair_resource(instance, limit, best_any);
  return best_any;
}

}  // namespace

BeamResult beam_search_rctsp(const MultigraphInstance& instance, const ProblemSpec& spec,
                             const BeamOptions& options) {
  require_variant(spec, {Variant::kRCTSP}, "beam_search_rctsp");
  const double limit = spec.resource_limit;
  double mu = std::isinf(limit) ? 0.0 : options.initial_multiplier;
  BeamResult result;
  bool have = false;
  double best_cost = kInfinity;
  double best_excess = kInfinity;
  for (int iter = 0; iter < std::max(1, options.outer_iters); ++iter) {
    BeamState tour = run_beam(instance, limit, mu, std::max(1, options.beam_width));
    // Recompute sums along the tour so reported values match evaluation.
    double cost = 0.0, resource = 0.0;
    for (size_t t = 0; t < tour.edges.size(); ++t) {
      auto e = instance.edge(tour.nodes[t], tour.nodes[t + 1], tour.edges[t]);
      cost += e[0];
      resource += e[1];
    }
    const bool feasible = resource <= limit;
    const double excess = std::max(0.0, resource - limit);
    const bool better = feasible ? (!result.feasible || cost < best_cost)
                                 : (!result.feasible && (!have || excess < best_excess));
    if (better) {
      result.route = Route{tour.nodes, tour.edges};
      result.feasible = feasible;
      best_cost = cost;
      best_excess = excess;
      have = true;
    }
    mu = feasible ? 0.5 * mu : (mu > 0.0 ? 2.0 * mu : 1.0);
  }
  result.multiplier = mu;
  return result;
}

namespace {

// Shared growth loop of the orienteering heuristics. `fits` checks usage
// after traversing an edge, `score` rates moving to v over edge e.
template <typename Fits, typename Score, typename ReturnCost>
Route grow_orienteering_path(const MultigraphInstance& instance, Fits fits, Score score,
                             ReturnCost return_cost) {
  const int n = instance.num_nodes();
  const int k = instance.attr_dim();
  std::vector<double> usage(k, 0.0);
  std::vector<char> visited(n, 0);
  visited[kDepot] = 1;
  Route route{{kDepot}, {}};
  int cur = kDepot;
  std::vector<double> after(k), back(k);
  auto can_return = [&](int v, const std::vector<double>& used) {
    for (int r = 0; r < instance.num_edges(v, kDepot); ++r) {
      auto e = instance.edge(v, kDepot, r);
      for (int a = 0; a < k; ++a) back[a] = used[a] + e[a];
      if (fits(back)) return true;
    }
    return false;
  };
  while (true) {
    double best = 0.0;
    int best_v = -1, best_l = -1;
    for (int v = 1; v < n; ++v) {
      if (visited[v]) continue;
      for (int l = 0; l < instance.num_edges(cur, v); ++l) {
        auto e = instance.edge(cur, v, l);
        for (int a = 0; a < k; ++a) after[a] = usage[a] + e[a];
        if (!fits(after) || !can_return(v, after)) continue;
        const double s = score(v, e, usage);
        if (s > best) {
          best = s;
          best_v = v;
          best_l = l;
        }
      }
    }
    if (best_v < 0) break;
    auto e = instance.edge(cur, best_v, best_l);
    for (int a = 0; a < k; ++a) usage[a] += e[a];
    visited[best_v] = 1;
    route.nodes.push_back(best_v);
    route.edges.push_back(best_l);
    cur = best_v;
  }
  if (cur != kDepot) {
    int chosen = -1;
    double chosen_cost = kInfinity;
    for (int r = 0; r < instance.num_edges(cur, kDepot); ++r) {
      auto e = instance.edge(cur, kDepot, r);
      for (int a = 0; a < k; ++a) back[a] = usage[a] + e[a];
      if (!fits(back)) continue;
      const double c = return_cost(e, usage);
      if (c < chosen_cost) {
        chosen_cost = c;
        chosen = r;
      }
    }
    route.nodes.push_back(kDepot);
    route.edges.push_back(chosen);
  }
  return route;
}

}  // namespace

Route greedy_op(const MultigraphInstance& instance, const ProblemSpec& spec) {
  require_variant(spec, {Variant::kOP}, "greedy_op");
  check_node_attrs(instance, spec.variant);
  const double t1 = spec.threshold1, t2 = spec.threshold2;
  const auto& prize = instance.node_attrs()->prize;
  auto fits = [&](const std::vector<double>& u) { return u[0] <= t1 && u[1] <= t2; };
  auto weighted = [&](std::span<const double> e, const std::vector<double>& usage) {
    const double w1 = t1 > 0.0 ? std::max(usage[0] / t1, 1e-9) : 1.0;
    const double w2 = t2 > 0.0 ? std::max(usage[1] / t2, 1e-9) : 1.0;
    return w1 * e[0] + w2 * e[1];
  };
  auto score = [&](int v, std::span<const double> e, const std::vector<double>& usage) {
    const double c = weighted(e, usage);
    return c > 0.0 ? prize[v] / c : kInfinity;
  };
  return grow_orienteering_path(instance, fits, score, weighted);
}

Route greedy_moop(const MultigraphInstance& instance, const ProblemSpec& spec,
                  const Preference& pref) {
  require_variant(spec, {Variant::kMOOP}, "greedy_moop");
  check_node_attrs(instance, spec.variant);
  const double limit = spec.resource_limit;
  const auto& prize = instance.node_attrs()->prize;
  auto fits = [&](const std::vector<double>& u) { return u[1] <= limit; };
  auto score = [&](int v, std::span<const double> e, const std::vector<double>&) {
    return pref[0] * prize[v] / (pref[1] * e[0] + 1e-9);
  };
  auto return_cost = [](std::span<const double> e, const std::vector<double>&) { return e[0]; };
  return grow_orienteering_path(instance, fits, score, return_cost);
}

Route insertion_motsptw(const MultigraphInstance& instance, const ProblemSpec& spec,
                        const Preference& pref) {
  require_variant(spec, {Variant::kMOTSPTW}, "insertion_motsptw");
  check_node_attrs(instance, spec.variant);
  const int n = instance.num_nodes();
  const auto& windows = instance.node_attrs()->windows;

  // Scalarised (late count, distance) of a closed partial tour.
  auto tour_score = [&](const std::vector<int>& nodes, const std::vector<int>& edges) {
    double clock = 0.0, dist = 0.0;
    int late = 0;
    for (size_t t = 0; t < edges.size(); ++t) {
      auto e = instance.edge(nodes[t], nodes[t + 1], edges[t]);
      dist += e[0];
      clock += e[1];
      const int v = nodes[t + 1];
      if (v != kDepot && clock > windows[v].close) ++late;
    }
    return pref[0] * late + pref[1] * dist;
  };

  std::vector<int> nodes = {kDepot, kDepot};
  std::vector<int> edges = {-1};  // placeholder for the empty depot loop
  std::vector<char> inserted(n, 0);
  inserted[kDepot] = 1;
  std::vector<int> cand_nodes, cand_edges;
  for (int step = 1; step < n; ++step) {
    double best = kInfinity;
    std::vector<int> best_nodes, best_edges;
    for (int v = 1; v < n; ++v) {
      if (inserted[v]) continue;
      for (size_t p = 0; p + 1 < nodes.size(); ++p) {
        const int a = nodes[p];
        const int b = nodes[p + 1];
        for (int l_in = 0; l_in < instance.num_edges(a, v); ++l_in) {
          for (int l_out = 0; l_out < instance.num_edges(v, b); ++l_out) {
            cand_nodes.assign(nodes.begin(), nodes.begin() + p + 1);
            cand_nodes.push_back(v);
            cand_nodes.insert(cand_nodes.end(), nodes.begin() + p + 1, nodes.end());
            cand_edges.assign(edges.begin(), edges.begin() + p);
            cand_edges.push_back(l_in);
            cand_edges.push_back(l_out);
            cand_edges.insert(cand_edges.end(), edges.begin() + p + 1, edges.end());
            const double s = tour_score(cand_nodes, cand_edges);
            if (s < best) {
              best = s;
              best_nodes = cand_nodes;
              best_edges = cand_edges;
            }
          }
        }
      }
    }
    nodes = std::move(best_nodes);
    edges = std::move(best_edges);
    for (int v : nodes) inserted[v] = 1;
  }
  return Route{nodes, edges};
}

}  // namespace mgroute
