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

// Fixed sequence arc selection: choose one parallel edge per consecutive node
// pair of a fixed node sequence.

#ifndef MGROUTE_FSASP_H_
#define MGROUTE_FSASP_H_

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mgroute/instance.h"
#include "mgroute/pareto.h"

namespace mgroute {

class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scalarization { kChebyshev, kLinear };

// Scalar objective minimised over edge selections. Single-objective
// variants use objectives[0]; multi-objective variants use the Chebyshev
// (or linear) scalarisation.
double scalar_cost(const RouteEvaluation& eval, Variant variant, const Preference& pref,
                   std::span<const double> ideal,
                   Scalarization scalarization = Scalarization::kChebyshev);

// RCTSP and OP constraints are hard for edge selection; MOOP and MOCVRP
// carry their constraint handling inside the objective or are unaffected.
bool has_hard_edge_constraint(Variant variant);

struct FsaspOptions {
  bool prune = true;
  size_t label_cap = 10000;
  Scalarization scalarization = Scalarization::kChebyshev;
};

struct FsaspResult {
  std::vector<int> edges;
  double cost = 0.0;
  bool approximate = false;  // label cap was hit
  size_t max_labels = 0;     // peak label count over positions
};

// Forward DP over positions keeping componentwise non-dominated labels
// (attribute sums, plus the late-arrival count for time windows). Throws
// Infeasible when no selection meets a hard constraint.
FsaspResult fsasp_dp(const MultigraphInstance& instance, const ProblemSpec& spec,
                     std::span<const int> nodes, const Preference& pref,
                     std::span<const double> ideal, const FsaspOptions& options = {});

// Per position argmin_l pref . e_l, lowest index on ties.
std::vector<int> fsasp_greedy_linear(const MultigraphInstance& instance,
                                     std::span<const int> nodes, const Preference& pref);

struct GapRecord {
  int instance = 0;
  double lambda1 = 0.0;
  double greedy_cost = 0.0;
  double dp_cost = 0.0;
  double gap = 0.0;
};

struct GapStudyResult {
  std::vector<GapRecord> cells;
  // Per instance: HV(greedy selections) - HV(DP selections) over the grid.
  std::vector<double> hv_difference;
};

// Supplies the node sequence studied for one (instance, preference) cell.
using PermutationSource =
    std::function<std::vector<int>(const MultigraphInstance&, const Preference&)>;

// For each instance and grid preference: take the permutation from `source`
// (nearest neighbour under that preference when empty) and compare
// greedy-linear against Chebyshev-optimal edge selection, ideal point 0.
// The HV difference only counts points inside spec.hv_reference.
GapStudyResult fsasp_gap_study(const std::vector<MultigraphInstance>& instances,
                               const ProblemSpec& spec, const std::vector<Preference>& grid,
                               const PermutationSource& source = {});

}  // namespace mgroute

#endif  // MGROUTE_FSASP_H_
