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

#include "mgroute/instance.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace mgroute {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kRCTSP: return "rctsp";
    case Variant::kOP: return "op";
    case Variant::kMOTSP: return "motsp";
    case Variant::kMOCVRP: return "mocvrp";
    case Variant::kMOTSPTW: return "motsptw";
    case Variant::kMOOP: return "moop";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kRCTSP, Variant::kOP, Variant::kMOTSP,
                    Variant::kMOCVRP, Variant::kMOTSPTW, Variant::kMOOP}) {
    if (variant_name(v) == name) return v;
  }
  throw std::invalid_argument("unknown variant: " + std::string(name));
}

bool is_multi_objective(Variant v) {
  return v == Variant::kMOTSP || v == Variant::kMOCVRP ||
         v == Variant::kMOTSPTW || v == Variant::kMOOP;
}

bool is_tour_variant(Variant v) {
  return v == Variant::kMOTSP || v == Variant::kRCTSP || v == Variant::kMOTSPTW;
}

bool is_orienteering_variant(Variant v) {
  return v == Variant::kOP || v == Variant::kMOOP;
}

int objective_dim(Variant v) { return is_multi_objective(v) ? 2 : 1; }

int state_dim(Variant v) {
  switch (v) {
    case Variant::kMOTSP: return 0;
    case Variant::kOP: return 2;
    default: return 1;
  }
}

void ProblemSpec::validate() const {
  auto require = [](double x, const char* what) {
    if (!(x > 0.0)) throw InstanceError(std::string(what) + " must be positive");
  };
  switch (variant) {
    case Variant::kMOCVRP: require(capacity, "capacity"); break;
    case Variant::kRCTSP:
    case Variant::kMOOP: require(resource_limit, "resource_limit"); break;
    case Variant::kOP:
      require(threshold1, "threshold1");
      require(threshold2, "threshold2");
      break;
    default: break;
  }
  if (!hv_reference.empty() &&
      static_cast<int>(hv_reference.size()) != objective_dim()) {
    throw InstanceError("hv_reference dimension does not match objectives");
  }
}

MultigraphInstance::MultigraphInstance(int num_nodes, int attr_dim,
                                       const EdgeSets& edge_sets,
                                       std::optional<NodeAttrs> node_attrs)
    : num_nodes_(num_nodes), attr_dim_(attr_dim), node_attrs_(std::move(node_attrs)) {
  if (num_nodes < 2) throw InstanceError("need at least two nodes");
  if (attr_dim < 1) throw InstanceError("attr_dim must be positive");
  const size_t pairs = static_cast<size_t>(num_nodes) * num_nodes;
  if (edge_sets.size() != pairs) throw InstanceError("edge_sets must have n*n entries");
  offsets_.reserve(pairs + 1);
  offsets_.push_back(0);
  for (int u = 0; u < num_nodes; ++u) {
    for (int v = 0; v < num_nodes; ++v) {
      const auto& set = edge_sets[pair_index(u, v)];
      if (u == v && !set.empty()) throw InstanceError("self loops are not allowed");
      if (u != v && set.empty()) {
        throw InstanceError("missing edge set for pair (" + std::to_string(u) +
                            "," + std::to_string(v) + ")");
      }
      for (const auto& e : set) {
        if (static_cast<int>(e.size()) != attr_dim) {
          throw InstanceError("edge attribute length != attr_dim");
        }
        for (double a : e) {
          if (!std::isfinite(a) || a < 0.0) {
            throw InstanceError("edge attributes must be finite and non-negative");
          }
          attrs_.push_back(a);
        }
      }
      offsets_.push_back(offsets_.back() + static_cast<int>(set.size()));
    }
  }
  if (node_attrs_) {
    auto check_len = [&](size_t len, const char* what) {
      if (len != 0 && len != static_cast<size_t>(num_nodes)) {
        throw InstanceError(std::string(what) + " must have one entry per node");
      }
    };
    check_len(node_attrs_->prize.size(), "prize");
    check_len(node_attrs_->demand.size(), "demand");
    check_len(node_attrs_->windows.size(), "windows");
    for (const auto& w : node_attrs_->windows) {
      if (!(w.close >= w.open)) throw InstanceError("time window closes before it opens");
    }
  }
}

MultigraphInstance::EdgeSets MultigraphInstance::edge_sets() const {
  EdgeSets out(static_cast<size_t>(num_nodes_) * num_nodes_);
  for (int u = 0; u < num_nodes_; ++u) {
    for (int v = 0; v < num_nodes_; ++v) {
      if (u == v) continue;
      auto& set = out[pair_index(u, v)];
      for (int l = 0; l < num_edges(u, v); ++l) {
        auto e = edge(u, v, l);
        set.emplace_back(e.begin(), e.end());
      }
    }
  }
  return out;
}

MultigraphInstance MultigraphInstance::scaled(std::span<const double> factors) const {
  if (static_cast<int>(factors.size()) != attr_dim_) {
    throw InstanceError("scale factor count != attr_dim");
  }
  MultigraphInstance copy = *this;
  for (size_t i = 0; i < copy.attrs_.size(); ++i) copy.attrs_[i] *= factors[i % attr_dim_];
  return copy;
}

bool MultigraphInstance::operator==(const MultigraphInstance& other) const {
  auto attrs_equal = [](const std::optional<NodeAttrs>& a, const std::optional<NodeAttrs>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    if (a->prize != b->prize || a->demand != b->demand) return false;
    if (a->windows.size() != b->windows.size()) return false;
    for (size_t i = 0; i < a->windows.size(); ++i) {
      if (a->windows[i].open != b->windows[i].open ||
          a->windows[i].close != b->windows[i].close) {
        return false;
      }
    }
    return true;
  };
  return num_nodes_ == other.num_nodes_ && attr_dim_ == other.attr_dim_ &&
         offsets_ == other.offsets_ && attrs_ == other.attrs_ &&
         attrs_equal(node_attrs_, other.node_attrs_);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

int cheapest_edge(const MultigraphInstance& instance, int u, int v,
                  std::span<const double> weights) {
  int best = 0;
  double best_cost = kInfinity;
  for (int l = 0; l < instance.num_edges(u, v); ++l) {
    const double c = dot(weights, instance.edge(u, v, l));
    if (c < best_cost) {
      best_cost = c;
      best = l;
    }
  }
  return best;
}

std::vector<double> cheapest_edge_matrix(const MultigraphInstance& instance,
                                         std::span<const double> weights) {
  const int n = instance.num_nodes();
  std::vector<double> out(static_cast<size_t>(n) * n, 0.0);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u == v) continue;
      double best = kInfinity;
      for (int l = 0; l < instance.num_edges(u, v); ++l) {
        best = std::min(best, dot(weights, instance.edge(u, v, l)));
      }
      out[static_cast<size_t>(u) * n + v] = best;
    }
  }
  return out;
}

void check_node_attrs(const MultigraphInstance& instance, Variant variant) {
  switch (variant) {
    case Variant::kOP:
    case Variant::kMOOP:
      if (!instance.has_prizes()) throw SpecMismatch("variant requires node prizes");
      break;
    case Variant::kMOCVRP:
      if (!instance.has_demands()) throw SpecMismatch("variant requires node demands");
      break;
    case Variant::kMOTSPTW:
      if (!instance.has_windows()) throw SpecMismatch("variant requires time windows");
      break;
    default: break;
  }
  if (instance.attr_dim() < 2) throw SpecMismatch("variant requires two edge attributes");
}

void validate_node_sequence(const MultigraphInstance& instance, Variant variant,
                            std::span<const int> nodes) {
  const int n = instance.num_nodes();
  for (int u : nodes) {
    if (u < 0 || u >= n) throw StructuralError("node index out of range");
  }
  for (size_t t = 0; t + 1 < nodes.size(); ++t) {
    if (nodes[t] == nodes[t + 1]) throw StructuralError("consecutive repeated node");
  }
  std::vector<int> seen(n, 0);
  if (is_tour_variant(variant)) {
    if (static_cast<int>(nodes.size()) != n + 1 || nodes.front() != nodes.back()) {
      throw StructuralError("tour must visit all nodes once and close the cycle");
    }
    if (variant == Variant::kMOTSPTW && nodes.front() != kDepot) {
      throw StructuralError("time-window tour must start at the depot");
    }
    for (int t = 0; t < n; ++t) {
      if (seen[nodes[t]]++) throw StructuralError("node visited twice");
    }
    return;
  }
  if (nodes.empty() || nodes.front() != kDepot) {
    throw StructuralError("route must start at the depot");
  }
  if (variant == Variant::kMOCVRP) {
    if (nodes.back() != kDepot) throw StructuralError("route must end at the depot");
    for (int u : nodes) {
      if (u != kDepot && seen[u]++) throw StructuralError("customer visited twice");
    }
    for (int u = 1; u < n; ++u) {
      if (!seen[u]) throw StructuralError("customer not visited");
    }
    return;
  }
  // Orienteering: {depot} alone is the empty route.
  if (nodes.size() == 1) return;
  if (nodes.size() < 3 || nodes.back() != kDepot) {
    throw StructuralError("orienteering route must return to the depot");
  }
  for (size_t t = 1; t + 1 < nodes.size(); ++t) {
    if (nodes[t] == kDepot) throw StructuralError("depot inside orienteering route");
    if (seen[nodes[t]]++) throw StructuralError("node visited twice");
  }
}

void validate_route(const MultigraphInstance& instance, Variant variant,
                    const Route& route) {
  validate_node_sequence(instance, variant, route.nodes);
  if (route.edges.size() + 1 != route.nodes.size()) {
    throw StructuralError("route needs exactly one edge per consecutive node pair");
  }
  for (size_t t = 0; t < route.edges.size(); ++t) {
    const int m = instance.num_edges(route.nodes[t], route.nodes[t + 1]);
    if (route.edges[t] < 0 || route.edges[t] >= m) {
      throw StructuralError("edge index out of range at position " + std::to_string(t));
    }
  }
}

namespace {

double total_prize(const MultigraphInstance& instance) {
  const auto& prize = instance.node_attrs()->prize;
  double s = 0.0;
  for (size_t u = 1; u < prize.size(); ++u) s += prize[u];
  return s;
}

}  // namespace

RouteEvaluation evaluate_route(const MultigraphInstance& instance,
                               const ProblemSpec& spec, const Route& route) {
  const Variant variant = spec.variant;
  check_node_attrs(instance, variant);
  validate_route(instance, variant, route);

  const int k = instance.attr_dim();
  const size_t len = route.nodes.size();
  std::vector<double> sums(k, 0.0);
  RouteEvaluation eval;
  eval.state_trace.reserve(len);
  const int sdim = state_dim(variant);

  double load = 0.0;
  double max_load = 0.0;
  double overload = 0.0;
  double clock = 0.0;
  int late = 0;
  double collected = 0.0;

  auto push_state = [&]() {
    std::vector<double> s;
    s.reserve(sdim);
    switch (variant) {
      case Variant::kRCTSP:
      case Variant::kMOOP: s.push_back(sums[1]); break;
      case Variant::kOP: s = {sums[0], sums[1]}; break;
      case Variant::kMOCVRP: s.push_back(load); break;
      case Variant::kMOTSPTW: s.push_back(clock); break;
      case Variant::kMOTSP: break;
    }
    eval.state_trace.push_back(std::move(s));
  };

  push_state();
  for (size_t t = 0; t + 1 < len; ++t) {
    const int u = route.nodes[t];
    const int v = route.nodes[t + 1];
    auto e = instance.edge(u, v, route.edges[t]);
    for (int a = 0; a < k; ++a) sums[a] += e[a];
    switch (variant) {
      case Variant::kMOCVRP:
        if (v == kDepot) {
          overload += std::max(0.0, load - spec.capacity);
          load = 0.0;
        } else {
          load += instance.node_attrs()->demand[v];
          max_load = std::max(max_load, load);
        }
        break;
      case Variant::kMOTSPTW:
        clock += e[1];
        if (v != kDepot && clock > instance.node_attrs()->windows[v].close) ++late;
        break;
      case Variant::kOP:
      case Variant::kMOOP:
        if (v != kDepot) collected += instance.node_attrs()->prize[v];
        break;
      default: break;
    }
    push_state();
  }

  switch (variant) {
    case Variant::kRCTSP:
      eval.objectives = {sums[0]};
      eval.resource_usage = {sums[1]};
      eval.violation = std::max(0.0, sums[1] - spec.resource_limit);
      break;
    case Variant::kMOTSP:
      eval.objectives = {sums[0], sums[1]};
      break;
    case Variant::kMOCVRP:
      eval.objectives = {sums[0], sums[1]};
      eval.resource_usage = {max_load};
      eval.violation = overload;
      break;
    case Variant::kMOTSPTW:
      eval.objectives = {static_cast<double>(late), sums[0]};
      eval.resource_usage = {clock};
      break;
    case Variant::kOP:
      eval.objectives = {total_prize(instance) - collected};
      eval.resource_usage = {sums[0], sums[1]};
      eval.violation = std::max(0.0, sums[0] - spec.threshold1) +
                       std::max(0.0, sums[1] - spec.threshold2);
      break;
    case Variant::kMOOP: {
      eval.resource_usage = {sums[1]};
      eval.violation = std::max(0.0, sums[1] - spec.resource_limit);
      if (eval.violation > 0.0) collected = 0.0;
      eval.objectives = {total_prize(instance) - collected, sums[0]};
      break;
    }
  }
  eval.feasible = eval.violation == 0.0;
  return eval;
}

}  // namespace mgroute
