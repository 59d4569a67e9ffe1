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

// Experiment plumbing behind the command line tool: JSON and CSV artifacts,
// dataset generation, solver drivers, metric aggregation and the self test.

#ifndef MGROUTE_HARNESS_H_
#define MGROUTE_HARNESS_H_

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgroute/fsasp.h"
#include "mgroute/instance.h"
#include "mgroute/instancegen.h"
#include "mgroute/model.h"
#include "mgroute/pareto.h"
#include "mgroute/training.h"

namespace mgroute::harness {

// Bad flags or inputs that contradict each other; the tool exits with 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes to path.tmp and renames, so readers never see a partial file.
void write_atomically(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Instance files: {"n", "attr_dim", "edges": [[u, v, [a..]], ...],
// "node_attrs": {...}, "spec": {...}}. Infinite values are written as null.
struct LoadedInstance {
  MultigraphInstance instance;
  ProblemSpec spec;
};
std::string instance_to_json(const MultigraphInstance& instance, const ProblemSpec& spec);
LoadedInstance instance_from_json(const std::string& text);

// {"pi": [...], "eps": [...]}
std::string route_to_json(const Route& route);
Route route_from_json(const std::string& text);

// gen: instance_00000.json ... plus manifest.json holding the generator
// settings, the per-index seeds and the calibrated spec.
void generate_dataset(const GenConfig& base, int count, int calibration_samples,
                      const std::string& out_dir);
// Instances of a directory in index order, and the distribution tag recorded
// in its manifest ("" without one).
std::vector<LoadedInstance> load_dataset(const std::string& dir, std::string* distribution = nullptr);

// Runs fn(0..count-1) on `workers` threads. Results must be written by index.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

struct SolveOptions {
  std::string method;  // nn, beam, greedy-op, insertion, greedy-moop, nepf
  int prefs = 1;       // bi-objective: 1 means lambda = (0.5, 0.5), else a grid
  int beam_width = 50;
  InferenceOptions nepf;
  double penalty = 10.0;
  int workers = 1;
};

struct SolveRecord {
  int instance = 0;
  std::vector<double> lambda;
  Route route;
  RouteEvaluation eval;
  double wall_ms = 0.0;
};

std::vector<Preference> solve_preferences(Variant variant, int prefs);
// Records ordered by (instance, preference). `model` is required for nepf.
std::vector<SolveRecord> solve_dataset(const std::vector<LoadedInstance>& data, const SolveOptions& options,
                                       const NepfModel* model = nullptr);
std::string solve_records_json(const std::string& method, const std::vector<SolveRecord>& records);

// One CSV row per instance and method.
struct MetricRow {
  std::string instance_id;
  std::string variant;
  std::string distribution;
  std::string method;
  std::optional<double> hv;  // bi-objective only
  double best_obj = 0.0;
  double feasible_rate = 0.0;
  double wall_ms = 0.0;
};

// best_obj is the objective for single-objective variants and the mean
// Chebyshev cost (ideal 0) over the solved preferences otherwise; hv uses the
// spec reference and ignores points outside it.
std::vector<MetricRow> metric_rows(const std::vector<LoadedInstance>& data,
                                   const std::vector<SolveRecord>& records, const std::string& method,
                                   const std::string& distribution);
std::string metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);

struct SummaryRow {
  std::string variant;
  std::string distribution;
  std::string method;
  int instances = 0;
  std::optional<double> mean_hv;
  double mean_obj = 0.0;
  double gap = 0.0;  // vs the best method of the same (variant, distribution)
  double feasible_rate = 0.0;
  double total_ms = 0.0;
};

// Gap uses HV when every row of the group has one, the objective otherwise.
std::vector<SummaryRow> aggregate_metrics(const std::vector<MetricRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);

// compare-fsasp: one row per (instance, preference).
std::string gap_csv(const GapStudyResult& result);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Quick oracle, gradient and invariant checks; `scale` multiplies trial counts.
std::vector<CheckResult> run_selftest(uint64_t seed, int scale = 1);

// Model and training settings sized for a single desktop CPU; the full-size
// sizes remain reachable through ModelConfig::for_variant and the flags.
ModelConfig desk_model_config(Variant variant);
TrainConfig desk_train_config();

// Manifest written next to every CLI output.
std::string run_manifest(const std::vector<std::string>& argv, const std::string& extra_json = "{}");

}  // namespace mgroute::harness

#endif  // MGROUTE_HARNESS_H_
