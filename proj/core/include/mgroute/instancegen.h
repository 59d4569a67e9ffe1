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

// Seeded instance generators: FLEX/FIX synthetic multigraphs, Euclidean
// instances expanded into multigraphs by bi-objective shortest paths, and
// per-variant parameter calibration.

#ifndef MGROUTE_INSTANCEGEN_H_
#define MGROUTE_INSTANCEGEN_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mgroute/instance.h"

namespace mgroute {

enum class Distribution { kFlex, kFix, kRealistic };
enum class Correlation { kStrong, kWeak, kNone };

struct GenConfig {
  Distribution distribution = Distribution::kFlex;
  int max_edges = 2;  // x in FLEXx / FIXx
  Correlation correlation = Correlation::kNone;
  int n = 10;
  Variant variant = Variant::kMOTSP;
  uint64_t seed = 0;

  void validate() const;
  // "flex2", "fix5", "real-nc", ...
  std::string distribution_tag() const;
};

// Parses "flexX", "fixX", "real-sc|wc|nc" into the distribution fields.
void parse_distribution(std::string_view tag, GenConfig& config);

class CalibrationUnstable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw multigraphs without node attributes.
MultigraphInstance gen_flex(const GenConfig& config);
MultigraphInstance gen_fix(const GenConfig& config);
MultigraphInstance gen_realistic(const GenConfig& config);

// Dispatches on config.distribution, then attaches the node attributes
// required by config.variant (prizes, demands or time windows).
MultigraphInstance generate(const GenConfig& config);

// Correlation mixing weights (nu, mu) for the realistic generator.
std::pair<double, double> correlation_weights(Correlation c);

// d2 = nu * d1 + mu * gamma * max_d1.
inline double second_distance(double nu, double mu, double gamma, double max_d1,
                              double d1) {
  return nu * d1 + mu * gamma * max_d1;
}

struct ParetoPath {
  double d1 = 0.0;
  double d2 = 0.0;
  int hops = 0;
};

// Bi-objective label-setting over a complete simple digraph with weights
// w1, w2 (row-major n x n). Returns, for every target, the Pareto-optimal
// (d1, d2) path costs from `source`, sorted by d1 ascending.
std::vector<std::vector<ParetoPath>> biobjective_pareto_paths(
    int n, const std::vector<double>& w1, const std::vector<double>& w2, int source);

// Time-window scheme: windows centred on the arrival times of a seeded
// random reference tour with greedy (minimum travel time) edges, half-width
// 0.15 * reference duration. Depot window is [0, inf).
std::vector<TimeWindow> gen_time_windows(const MultigraphInstance& instance, uint64_t seed);

// Monte-Carlo constants behind a calibrated ProblemSpec.
struct Calibration {
  double r_cost = 0.0;      // resource of the cost-greedy tour
  double r_resource = 0.0;  // resource of the resource-greedy tour
  double c11 = 0.0, c12 = 0.0, c21 = 0.0, c22 = 0.0;  // C^(j)_i as c{j}{i}
};

// Nearest-neighbour tour from the depot under a single attribute, taking the
// cheapest parallel edge under that attribute. Returns attribute sums.
std::vector<double> single_attribute_nn_sums(const MultigraphInstance& instance, int attr);

Calibration estimate_calibration(const GenConfig& config, int samples, uint64_t stream);

// Builds the ProblemSpec for config.variant: R = (R_cost + R_resource) / 4,
// T1 = T2 = (C^(1)_2 + C^(2)_2) / 8, capacity 50, plus the HV reference.
// Two independent estimates are compared; more than 10% relative
// disagreement raises CalibrationUnstable.
ProblemSpec calibrate_thresholds(const GenConfig& config, int samples);

// Resource limit and thresholds straight from the formulas.
inline double resource_limit_from(double r_cost, double r_resource) {
  return (r_cost + r_resource) / 4.0;
}
inline double op_threshold_from(double c12, double c22) { return (c12 + c22) / 8.0; }

// HV reference point used for the bi-objective variants.
std::vector<double> default_hv_reference(Variant variant, Distribution dist, int n);

inline constexpr double kCvrpCapacity = 50.0;

}  // namespace mgroute

#endif  // MGROUTE_INSTANCEGEN_H_
