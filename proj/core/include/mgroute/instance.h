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

// Canonical data model for directed multigraph routing instances: the
// multigraph itself, problem variants, routes and route evaluation.

#ifndef MGROUTE_INSTANCE_H_
#define MGROUTE_INSTANCE_H_

#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mgroute {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr int kDepot = 0;

class InstanceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Route violates the structural or visit rules of its variant.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Instance is missing node attributes required by the variant.
class SpecMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Variant { kRCTSP, kOP, kMOTSP, kMOCVRP, kMOTSPTW, kMOOP };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

bool is_multi_objective(Variant v);
// Tour variants visit every node once and close the cycle.
bool is_tour_variant(Variant v);
// Orienteering variants visit a subset and return to the depot.
bool is_orienteering_variant(Variant v);
int objective_dim(Variant v);
// Dimension of the per-step state s_t recorded in RouteEvaluation.
int state_dim(Variant v);

struct TimeWindow {
  double open = 0.0;
  double close = kInfinity;
};

struct NodeAttrs {
  std::vector<double> prize;
  std::vector<double> demand;
  std::vector<TimeWindow> windows;
};

struct ProblemSpec {
  Variant variant = Variant::kMOTSP;
  double capacity = 0.0;        // MOCVRP
  double resource_limit = 0.0;  // RCTSP, MOOP
  double threshold1 = 0.0;      // OP
  double threshold2 = 0.0;      // OP
  std::vector<double> hv_reference;

  int objective_dim() const { return mgroute::objective_dim(variant); }
  // Throws InstanceError when a parameter needed by the variant is not
  // positive.
  void validate() const;
};

// Directed complete multigraph. Every ordered pair (u, v), u != v, owns a
// non-empty list of parallel edges, each carrying attr_dim non-negative
// attributes. Edges are stored contiguously, pair-major.
class MultigraphInstance {
 public:
  using EdgeSets = std::vector<std::vector<std::vector<double>>>;

  // edge_sets is indexed by u * n + v; diagonal entries must be empty.
  MultigraphInstance(int num_nodes, int attr_dim, const EdgeSets& edge_sets,
                     std::optional<NodeAttrs> node_attrs = std::nullopt);

  int num_nodes() const { return num_nodes_; }
  int attr_dim() const { return attr_dim_; }
  int depot() const { return kDepot; }

  int num_edges(int u, int v) const {
    const int p = pair_index(u, v);
    return offsets_[p + 1] - offsets_[p];
  }
  int total_edges() const { return offsets_.back(); }
  std::span<const double> edge(int u, int v, int l) const {
    return {attrs_.data() + static_cast<size_t>(first_edge(u, v) + l) * attr_dim_,
            static_cast<size_t>(attr_dim_)};
  }
  // Global index of the first edge of pair (u, v) in the flat edge list.
  int first_edge(int u, int v) const { return offsets_[pair_index(u, v)]; }
  std::span<const double> flat_attrs() const { return attrs_; }

  const std::optional<NodeAttrs>& node_attrs() const { return node_attrs_; }
  bool has_prizes() const { return node_attrs_ && !node_attrs_->prize.empty(); }
  bool has_demands() const { return node_attrs_ && !node_attrs_->demand.empty(); }
  bool has_windows() const { return node_attrs_ && !node_attrs_->windows.empty(); }

  EdgeSets edge_sets() const;
  // Copy with attribute axis k multiplied by factors[k].
  MultigraphInstance scaled(std::span<const double> factors) const;

  bool operator==(const MultigraphInstance& other) const;

 private:
  int pair_index(int u, int v) const { return u * num_nodes_ + v; }

  int num_nodes_;
  int attr_dim_;
  std::vector<int> offsets_;
  std::vector<double> attrs_;
  std::optional<NodeAttrs> node_attrs_;
};

struct Route {
  std::vector<int> nodes;
  std::vector<int> edges;

  bool operator==(const Route&) const = default;
};

struct RouteEvaluation {
  std::vector<double> objectives;
  std::vector<double> resource_usage;
  double violation = 0.0;
  bool feasible = true;
  // One state vector per route position; state_dim(variant) entries each.
  std::vector<std::vector<double>> state_trace;
};

// Throws SpecMismatch when node attributes required by the variant are absent.
void check_node_attrs(const MultigraphInstance& instance, Variant variant);

// Checks node visit rules only (edges ignored). Throws StructuralError.
void validate_node_sequence(const MultigraphInstance& instance, Variant variant,
                            std::span<const int> nodes);
void validate_route(const MultigraphInstance& instance, Variant variant,
                    const Route& route);

RouteEvaluation evaluate_route(const MultigraphInstance& instance,
                               const ProblemSpec& spec, const Route& route);

// Entry (u, v) is min over parallel edges of weights . e_l; diagonal is 0.
// Row-major N x N.
std::vector<double> cheapest_edge_matrix(const MultigraphInstance& instance,
                                         std::span<const double> weights);

// Index of the edge in E_uv minimising weights . e_l, lowest index on ties.
int cheapest_edge(const MultigraphInstance& instance, int u, int v,
                  std::span<const double> weights);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace mgroute

#endif  // MGROUTE_INSTANCE_H_
