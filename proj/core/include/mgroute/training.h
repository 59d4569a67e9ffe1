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

// Hierarchical REINFORCE for the node and edge policies, plus inference
// with POMO starts and attribute-scaling augmentation.

#ifndef MGROUTE_TRAINING_H_
#define MGROUTE_TRAINING_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mgroute/instance.h"
#include "mgroute/instancegen.h"
#include "mgroute/model.h"
#include "mgroute/optim.h"
#include "mgroute/pareto.h"

namespace mgroute {

struct TrainConfig {
  int batch_size = 64;
  int k1 = 0;  // 0: as many starts as the variant allows (N or N-1)
  int k2_train = 20;
  int k2_eval = 50;
  int epochs = 1;
  int instances_per_epoch = 2000;
  double lr = 1e-4;
  double weight_decay = 1e-6;
  double penalty = 10.0;
  uint64_t seed = 0;
  int validation_size = 100;
  int calibration_samples = 500;
  double grad_clip = 0.0;  // global norm clip, 0 = off

  void validate(bool learned_edges) const;
  std::string to_json() const;
};

// -cost - penalty * violation; bi-objective costs are Chebyshev with ideal 0.
double reward(const RouteEvaluation& eval, const ProblemSpec& spec, const Preference& pref,
              double penalty);

// rewards[j][k] for POMO trajectory j and edge sample k.
struct Advantages {
  std::vector<double> best;                // R*(pi_j)
  double node_baseline = 0.0;              // mean_j R*
  std::vector<double> node;                // R* - b_node
  std::vector<std::vector<double>> edge;   // R - b_edge; exactly 0 for equal rewards
  double node_sum = 0.0;                   // sum_j node[j]
};
Advantages compute_advantages(const std::vector<std::vector<double>>& rewards);

struct StepStats {
  double loss = 0.0;
  double mean_best_reward = 0.0;  // mean over instances and starts of R*
  double est_loss = 0.0;
  double grad_norm = 0.0;
  int identity_checks = 0;       // instances whose advantage identities were asserted
  int zero_edge_batches = 0;     // (i, j) with all K2 rewards equal
  double max_node_sum = 0.0;     // largest |sum_j A_j| seen
};

// Raised when an advantage identity fails.
class IdentityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One gradient step on a batch. `keys` supplies the per-instance stream
// seed; trajectory j and edge sample k derive their streams from it. With
// `optimizer` null the gradients are left in the parameters.
StepStats hierarchical_step(NepfModel& model, nn::Adam* optimizer,
                            const std::vector<MultigraphInstance>& batch, const ProblemSpec& spec,
                            const Preference& pref, const TrainConfig& config,
                            const std::vector<uint64_t>& keys);

struct ValidationStats {
  double mean_reward = 0.0;       // best over starts, per instance
  double mean_cost = 0.0;         // scalar cost of that route
  double feasible_rate = 0.0;     // over all greedy rollouts
  double best_feasible_rate = 0.0;
  double est_mse = 0.0;           // estimator error on greedy rollouts
};

struct EpochRecord {
  int epoch = 0;
  int64_t steps = 0;
  double train_reward = 0.0;
  double train_loss = 0.0;
  double est_loss = 0.0;
  int identity_checks = 0;
  int zero_edge_batches = 0;
  double max_node_sum = 0.0;
  ValidationStats validation;
  std::string to_json() const;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_validation = 0.0;
  ProblemSpec spec;
};

// Trains in place. Epoch 0 is the untrained model's validation. When
// `out_dir` is non-empty writes best.ckpt, last.ckpt, metrics.jsonl and
// manifest.json there. The JSONL log contains no timing and is identical
// across runs with the same configuration.
TrainResult train(NepfModel& model, const TrainConfig& config, const GenConfig& gen,
                  const std::string& out_dir, std::ostream* progress = nullptr);

// The frozen validation set used by train().
std::vector<MultigraphInstance> validation_instances(const TrainConfig& config, const GenConfig& gen);

ValidationStats validate_model(const NepfModel& model, const std::vector<MultigraphInstance>& instances,
                               const ProblemSpec& spec, const TrainConfig& config);

// Augmentation factors; augmentation a scales attribute k by
// kAugFactors[(a * (k + 1)) % 8], so a = 0 is the identity.
inline constexpr double kAugFactors[8] = {1.0, 0.5, 2.0, 0.8, 1.25, 0.9, 1.1, 0.75};
std::vector<double> augmentation_scales(int aug_index, int attr_dim);

struct InferenceOptions {
  int k1 = 0;
  int k2 = 50;
  bool sample_edges = true;  // add K2 samples to the argmax selection
  int aug = 1;               // 1..8
  uint64_t seed = 0;
};

struct Candidate {
  Route route;
  RouteEvaluation eval;  // always on the unscaled instance
  double reward = 0.0;
};

// Greedy POMO over the starts and augmentations. Returns every candidate;
// the first entry is the best by reward (ties keep the earlier candidate).
std::vector<Candidate> nepf_candidates(const NepfModel& model, const MultigraphInstance& instance,
                                       const ProblemSpec& spec, const Preference& pref,
                                       const InferenceOptions& options, double penalty = 10.0);
Candidate nepf_solve(const NepfModel& model, const MultigraphInstance& instance,
                     const ProblemSpec& spec, const Preference& pref,
                     const InferenceOptions& options, double penalty = 10.0);

void save_model(const std::string& path, const NepfModel& model, const nn::Adam* adam);
NepfModel load_model(const std::string& path);

}  // namespace mgroute

#endif  // MGROUTE_TRAINING_H_
