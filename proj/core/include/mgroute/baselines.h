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

// Constructive heuristics used as comparison points. All are deterministic
// and emit routes that pass validate_route for their variant.

#ifndef MGROUTE_BASELINES_H_
#define MGROUTE_BASELINES_H_

#include "mgroute/instance.h"
#include "mgroute/pareto.h"

namespace mgroute {

// MOTSP / MOCVRP. From the depot, repeatedly move to the unvisited node with
// the lowest linearly scalarised cheapest edge; for MOCVRP only customers
// whose demand fits the remaining load are candidates, otherwise the vehicle
// returns to the depot. Edges are picked greedily per pair.
Route nearest_neighbor(const MultigraphInstance& instance, const ProblemSpec& spec,
                       const Preference& pref);

struct BeamOptions {
  int beam_width = 50;
  int outer_iters = 5;
  double initial_multiplier = 1.0;
};

struct BeamResult {
  Route route;
  bool feasible = false;
  double multiplier = 0.0;  // Lagrange multiplier after the last iteration
};

// RCTSP beam search on the Lagrangian score cost + mu * resource. Partial
// tours are pruned by resource feasibility and (last node, visited set)
// dominance; the best completed tour is repaired by swapping to parallel
// edges with lower resource. mu doubles after an infeasible iteration and
// halves otherwise. Returns the best feasible tour seen, or the least
// violating one flagged infeasible.
BeamResult beam_search_rctsp(const MultigraphInstance& instance, const ProblemSpec& spec,
                             const BeamOptions& options = {});

// OP: grow a path from the depot by maximum prize-to-weighted-cost ratio,
// weighting cost i by the fraction usage_i / T_i already consumed. A move is
// only allowed if a direct return edge keeps both thresholds satisfied.
Route greedy_op(const MultigraphInstance& instance, const ProblemSpec& spec);

// MOTSPTW cheapest insertion on lambda_1 * delta(late windows) +
// lambda_2 * delta(distance), trying every position and every pair of
// parallel edges around the inserted node.
Route insertion_motsptw(const MultigraphInstance& instance, const ProblemSpec& spec,
                        const Preference& pref);

// MOOP: like greedy_op with ratio (lambda_1 * prize) / (lambda_2 * cost)
// under the single resource limit; stops once no move has a positive score.
Route greedy_moop(const MultigraphInstance& instance, const ProblemSpec& spec,
                  const Preference& pref);

}  // namespace mgroute

#endif  // MGROUTE_BASELINES_H_
