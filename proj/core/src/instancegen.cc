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

#include "mgroute/instancegen.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "mgroute/rng.h"

namespace mgroute {
namespace {

// Stream tags keep every random quantity on its own counter stream.
enum StreamTag : uint64_t {
  kEdgeAttrStream = 1,
  kEdgeCountStream = 2,
  kPrizeStream = 3,
  kDemandStream = 4,
  kPointStream = 5,
  kGammaStream = 6,
  kWindowStream = 7,
  kCalibrationStream = 8,
};

uint64_t pair_id(int n, int u, int v) { return static_cast<uint64_t>(u) * n + v; }

}  // namespace

void GenConfig::validate() const {
  if (n < 3) throw std::invalid_argument("n must be at least 3");
  if (distribution != Distribution::kRealistic && max_edges < 1) {
    throw std::invalid_argument("edge multiplicity x must be at least 1");
  }
}

std::string GenConfig::distribution_tag() const {
  switch (distribution) {
    case Distribution::kFlex: return "flex" + std::to_string(max_edges);
    case Distribution::kFix: return "fix" + std::to_string(max_edges);
    case Distribution::kRealistic:
      switch (correlation) {
        case Correlation::kStrong: return "real-sc";
        case Correlation::kWeak: return "real-wc";
        case Correlation::kNone: return "real-nc";
      }
  }
  return "unknown";
}

void parse_distribution(std::string_view tag, GenConfig& config) {
  auto parse_count = [&](std::string_view digits) {
    if (digits.empty()) throw std::invalid_argument("missing edge count in " + std::string(tag));
    int x = 0;
    for (char c : digits) {
      if (c < '0' || c > '9') throw std::invalid_argument("bad distribution " + std::string(tag));
      x = x * 10 + (c - '0');
    }
    return x;
  };
  if (tag.starts_with("flex")) {
    config.distribution = Distribution::kFlex;
    config.max_edges = parse_count(tag.substr(4));
  } else if (tag.starts_with("fix")) {
    config.distribution = Distribution::kFix;
    config.max_edges = parse_count(tag.substr(3));
  } else if (tag == "real-sc") {
    config.distribution = Distribution::kRealistic;
    config.correlation = Correlation::kStrong;
  } else if (tag == "real-wc") {
    config.distribution = Distribution::kRealistic;
    config.correlation = Correlation::kWeak;
  } else if (tag == "real-nc") {
    config.distribution = Distribution::kRealistic;
    config.correlation = Correlation::kNone;
  } else {
    throw std::invalid_argument("unknown distribution: " + std::string(tag));
  }
}

MultigraphInstance gen_flex(const GenConfig& config) {
  config.validate();
  const int n = config.n;
  MultigraphInstance::EdgeSets sets(static_cast<size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u == v) continue;
      const uint64_t p = pair_id(n, u, v);
      CounterRng count_rng(config.seed, {kEdgeCountStream, p});
      const int m = 1 + static_cast<int>(count_rng.below(config.max_edges));
      auto& set = sets[p];
      for (int l = 0; l < m; ++l) {
        CounterRng rng(config.seed, {kEdgeAttrStream, p, static_cast<uint64_t>(l)});
        const double a1 = rng.uniform();
        const double a2 = rng.uniform();
        set.push_back({a1, a2});
      }
    }
  }
  return MultigraphInstance(n, 2, sets);
}

MultigraphInstance gen_fix(const GenConfig& config) {
  config.validate();
  const int n = config.n;
  MultigraphInstance::EdgeSets sets(static_cast<size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u == v) continue;
      const uint64_t p = pair_id(n, u, v);
      auto& set = sets[p];
      for (int l = 0; l < config.max_edges; ++l) {
        CounterRng rng(config.seed, {kEdgeAttrStream, p, static_cast<uint64_t>(l)});
        const double a1 = rng.uniform();
        const double eta = rng.uniform(-0.1, 0.1);
        const double a2 = std::clamp(1.0 - a1 + eta, 0.0, 1.0);
        set.push_back({a1, a2});
      }
    }
  }
  return MultigraphInstance(n, 2, sets);
}

std::pair<double, double> correlation_weights(Correlation c) {
  switch (c) {
    case Correlation::kStrong: return {0.9, 0.1};
    case Correlation::kWeak: return {0.5, 0.5};
    case Correlation::kNone: return {0.1, 0.9};
  }
  return {0.5, 0.5};
}

std::vector<std::vector<ParetoPath>> biobjective_pareto_paths(
    int n, const std::vector<double>& w1, const std::vector<double>& w2, int source) {
  struct Label {
    double d1, d2;
    int hops, node;
  };
  auto later = [](const Label& a, const Label& b) {
    if (a.d1 != b.d1) return a.d1 > b.d1;
    if (a.d2 != b.d2) return a.d2 > b.d2;
    return a.hops > b.hops;
  };
  std::priority_queue<Label, std::vector<Label>, decltype(later)> queue(later);
  std::vector<std::vector<ParetoPath>> permanent(n);
  queue.push({0.0, 0.0, 0, source});
  while (!queue.empty()) {
    const Label label = queue.top();
    queue.pop();
    auto& at = permanent[label.node];
    // Labels leave the queue in lexicographic order, so the newest permanent
    // label has the smallest d2 seen so far at this node.
    if (!at.empty() && at.back().d2 <= label.d2) continue;
    at.push_back({label.d1, label.d2, label.hops});
    if (label.node == source && label.hops > 0) continue;
    for (int v = 0; v < n; ++v) {
      if (v == label.node || v == source) continue;
      const size_t e = static_cast<size_t>(label.node) * n + v;
      queue.push({label.d1 + w1[e], label.d2 + w2[e], label.hops + 1, v});
    }
  }
  permanent[source].clear();
  return permanent;
}

MultigraphInstance gen_realistic(const GenConfig& config) {
  config.validate();
  const int n = config.n;
  std::vector<double> x(n), y(n);
  for (int u = 0; u < n; ++u) {
    CounterRng rng(config.seed, {kPointStream, static_cast<uint64_t>(u)});
    x[u] = rng.uniform();
    y[u] = rng.uniform();
  }
  std::vector<double> d1(static_cast<size_t>(n) * n, 0.0);
  double max_d1 = 0.0;
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      const double dx = x[u] - x[v];
      const double dy = y[u] - y[v];
      d1[static_cast<size_t>(u) * n + v] = std::sqrt(dx * dx + dy * dy);
      max_d1 = std::max(max_d1, d1[static_cast<size_t>(u) * n + v]);
    }
  }
  const auto [nu, mu] = correlation_weights(config.correlation);
  std::vector<double> d2(d1.size(), 0.0);
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      CounterRng rng(config.seed, {kGammaStream, pair_id(n, u, v)});
      const double gamma = rng.uniform();
      const double value =
          second_distance(nu, mu, gamma, max_d1, d1[static_cast<size_t>(u) * n + v]);
      d2[static_cast<size_t>(u) * n + v] = value;
      d2[static_cast<size_t>(v) * n + u] = value;
    }
  }
  MultigraphInstance::EdgeSets sets(static_cast<size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    const auto paths = biobjective_pareto_paths(n, d1, d2, u);
    for (int v = 0; v < n; ++v) {
      if (u == v) continue;
      auto& set = sets[static_cast<size_t>(u) * n + v];
      for (const auto& p : paths[v]) set.push_back({p.d1, p.d2});
    }
  }
  return MultigraphInstance(n, 2, sets);
}

std::vector<TimeWindow> gen_time_windows(const MultigraphInstance& instance, uint64_t seed) {
  const int n = instance.num_nodes();
  CounterRng rng(seed, {kWindowStream});
  std::vector<int> order(n - 1);
  std::iota(order.begin(), order.end(), 1);
  for (int i = n - 2; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  const std::vector<double> time_only = {0.0, 1.0};
  std::vector<double> arrival(n, 0.0);
  double clock = 0.0;
  int prev = kDepot;
  for (int v : order) {
    clock += instance.edge(prev, v, cheapest_edge(instance, prev, v, time_only))[1];
    arrival[v] = clock;
    prev = v;
  }
  clock += instance.edge(prev, kDepot, cheapest_edge(instance, prev, kDepot, time_only))[1];
  const double half_width = 0.15 * clock;
  std::vector<TimeWindow> windows(n);
  for (int v = 1; v < n; ++v) {
    windows[v].open = std::max(0.0, arrival[v] - half_width);
    windows[v].close = arrival[v] + half_width;
  }
  return windows;
}

MultigraphInstance generate(const GenConfig& config) {
  MultigraphInstance raw = [&] {
    switch (config.distribution) {
      case Distribution::kFlex: return gen_flex(config);
      case Distribution::kFix: return gen_fix(config);
      case Distribution::kRealistic: return gen_realistic(config);
    }
    throw std::invalid_argument("unknown distribution");
  }();
  const int n = config.n;
  NodeAttrs attrs;
  switch (config.variant) {
    case Variant::kOP:
    case Variant::kMOOP:
      attrs.prize.assign(n, 0.0);
      for (int u = 1; u < n; ++u) {
        CounterRng rng(config.seed, {kPrizeStream, static_cast<uint64_t>(u)});
        attrs.prize[u] = rng.uniform();
      }
      break;
    case Variant::kMOCVRP:
      attrs.demand.assign(n, 0.0);
      for (int u = 1; u < n; ++u) {
        CounterRng rng(config.seed, {kDemandStream, static_cast<uint64_t>(u)});
        attrs.demand[u] = static_cast<double>(1 + rng.below(9));
      }
      break;
    case Variant::kMOTSPTW:
      attrs.windows = gen_time_windows(raw, config.seed);
      break;
    default:
      return raw;
  }
  return MultigraphInstance(n, raw.attr_dim(), raw.edge_sets(), std::move(attrs));
}

std::vector<double> single_attribute_nn_sums(const MultigraphInstance& instance, int attr) {
  const int n = instance.num_nodes();
  std::vector<double> weights(instance.attr_dim(), 0.0);
  weights[attr] = 1.0;
  const auto cheapest = cheapest_edge_matrix(instance, weights);
  std::vector<double> sums(instance.attr_dim(), 0.0);
  std::vector<char> visited(n, 0);
  visited[kDepot] = 1;
  int cur = kDepot;
  auto traverse = [&](int v) {
    auto e = instance.edge(cur, v, cheapest_edge(instance, cur, v, weights));
    for (size_t a = 0; a < sums.size(); ++a) sums[a] += e[a];
    cur = v;
  };
  for (int step = 1; step < n; ++step) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (visited[v]) continue;
      if (best < 0 || cheapest[static_cast<size_t>(cur) * n + v] <
                          cheapest[static_cast<size_t>(cur) * n + best]) {
        best = v;
      }
    }
    visited[best] = 1;
    traverse(best);
  }
  traverse(kDepot);
  return sums;
}

Calibration estimate_calibration(const GenConfig& config, int samples, uint64_t stream) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  Calibration c;
  for (int s = 0; s < samples; ++s) {
    GenConfig sample = config;
    sample.variant = Variant::kMOTSP;
    sample.seed = derive_key(config.seed, {kCalibrationStream, stream, static_cast<uint64_t>(s)});
    const MultigraphInstance g = generate(sample);
    const auto by_first = single_attribute_nn_sums(g, 0);
    const auto by_second = single_attribute_nn_sums(g, 1);
    c.r_cost += by_first[1];
    c.r_resource += by_second[1];
    c.c11 += by_first[0];
    c.c12 += by_first[1];
    c.c21 += by_second[0];
    c.c22 += by_second[1];
  }
  const double inv = 1.0 / samples;
  c.r_cost *= inv;
  c.r_resource *= inv;
  c.c11 *= inv;
  c.c12 *= inv;
  c.c21 *= inv;
  c.c22 *= inv;
  return c;
}

std::vector<double> default_hv_reference(Variant variant, Distribution dist, int n) {
  // Reference points are quoted for 100 nodes and scaled linearly with n.
  const double scale = n / 100.0;
  const bool fix = dist == Distribution::kFix;
  switch (variant) {
    case Variant::kMOTSP:
    case Variant::kMOCVRP:
      return fix ? std::vector<double>{100 * scale, 100 * scale}
                 : std::vector<double>{60 * scale, 60 * scale};
    case Variant::kMOTSPTW:
      return fix ? std::vector<double>{105 * scale, 100 * scale}
                 : std::vector<double>{105 * scale, 60 * scale};
    case Variant::kMOOP:
      return fix ? std::vector<double>{50 * scale, 30 * scale}
                 : std::vector<double>{50 * scale, 25 * scale};
    default: return {};
  }
}

ProblemSpec calibrate_thresholds(const GenConfig& config, int samples) {
  config.validate();
  ProblemSpec spec;
  spec.variant = config.variant;
  spec.hv_reference = default_hv_reference(config.variant, config.distribution, config.n);
  auto check = [](double a, double b, const char* what) {
    if (std::abs(a - b) > 0.1 * std::max(std::abs(a), std::abs(b))) {
      throw CalibrationUnstable(std::string("independent estimates of ") + what +
                                " disagree by more than 10%");
    }
  };
  switch (config.variant) {
    case Variant::kRCTSP:
    case Variant::kMOOP: {
      const Calibration a = estimate_calibration(config, samples, 0);
      const Calibration b = estimate_calibration(config, samples, 1);
      const double ra = resource_limit_from(a.r_cost, a.r_resource);
      const double rb = resource_limit_from(b.r_cost, b.r_resource);
      check(ra, rb, "R");
      spec.resource_limit = 0.5 * (ra + rb);
      break;
    }
    case Variant::kOP: {
      const Calibration a = estimate_calibration(config, samples, 0);
      const Calibration b = estimate_calibration(config, samples, 1);
      const double ta = op_threshold_from(a.c12, a.c22);
      const double tb = op_threshold_from(b.c12, b.c22);
      check(ta, tb, "T");
      spec.threshold1 = spec.threshold2 = 0.5 * (ta + tb);
      break;
    }
    case Variant::kMOCVRP:
      spec.capacity = kCvrpCapacity;
      break;
    default: break;
  }
  return spec;
}

}  // namespace mgroute
