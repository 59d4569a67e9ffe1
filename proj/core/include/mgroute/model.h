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

// Node-edge policy: pre-encoding of parallel edge sets, GREAT + transformer
// encoder, multi-pointer node decoder with an optional state estimator, and
// a non-autoregressive edge selection stage. Multi-objective models take the
// pointer projections from preference hypernetworks.

#ifndef MGROUTE_MODEL_H_
#define MGROUTE_MODEL_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgroute/instance.h"
#include "mgroute/optim.h"
#include "mgroute/pareto.h"
#include "mgroute/tensor.h"

namespace mgroute {

class NoFeasibleNode : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EdgeStage { kLearned, kGreedy };

struct ModelConfig {
  Variant variant = Variant::kMOTSP;
  int d = 128;
  int d_edge = 64;
  int great_layers = 5;  // the last one only forms node features
  int transformer_layers = 2;
  int heads = 8;
  int ffn_hidden = 512;
  int hyper_hidden = 128;
  double clip_node = 50.0;
  double clip_edge = 1.0;
  bool multi_objective = true;
  EdgeStage edge_stage = EdgeStage::kGreedy;
  bool state_estimator = false;
  uint64_t init_seed = 0;

  // Variant wiring: hypernets for bi-objective variants, greedy edges for
  // MOTSP/MOCVRP, the estimator for RCTSP/OP/MOOP.
  static ModelConfig for_variant(Variant variant);
  void validate() const;

  int feature_dim() const;      // edge attributes + end-point node attributes
  int state_dim() const;        // width of s_t in the decoder query, 0 = none
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

// Per-edge input features in flat edge order: edge attributes followed by
// the end-point node attributes (prize, demand / capacity, or the window
// bounds with an open depot window clipped to the latest finite close).
std::vector<double> edge_features(const MultigraphInstance& instance, const ProblemSpec& spec);

// Weights of the cheapest-edge penalty in the node decoder.
std::vector<double> decoder_cost_weights(Variant variant, const Preference& pref);
// Edge-stage cost: lambda . e_l for bi-objective variants, e_l[0] otherwise.
double fsasp_cost_term(std::span<const double> edge, Variant variant, const Preference& pref);

struct PointerWeights {
  nn::Tensor node_q, node_k;  // d x d
  nn::Tensor edge_q, edge_k;  // d' x d'
};

struct EncodedInstance {
  int n = 0;
  nn::Tensor distances;  // (n*n) x d, row u*n+v
  nn::Tensor nodes;      // n x d
};

// (q W^q)(k W^k)^T / (heads * sqrt(scale_dim)): the head-averaged scaled dot
// product with W^q, W^k holding all heads side by side.
nn::Tensor multi_pointer_scores(const nn::Tensor& q, const nn::Tensor& k, const nn::Tensor& wq,
                                const nn::Tensor& wk, int heads, int scale_dim);
// clip * tanh(scores - beta * cost) followed by a masked log-softmax. `cost`
// may be undefined (no penalty); clip <= 0 disables clipping.
nn::Tensor clipped_log_probs(const nn::Tensor& scores, const nn::Tensor& cost,
                             const nn::Tensor& beta, double clip, std::span<const char> mask);

struct RolloutOptions {
  int k1 = 0;  // 0: as many starts as the variant allows
  bool greedy = false;
  uint64_t rng_key = 0;
  // Teacher forcing: replay these node sequences instead of choosing.
  const std::vector<std::vector<int>>* forced = nullptr;
};

struct NodeRollout {
  std::vector<std::vector<int>> routes;
  nn::Tensor log_prob;  // k1 x 1
  // Probability of every decided step, per trajectory.
  std::vector<std::vector<double>> step_probs;
  // Estimator outputs per decision step (k1 x state_dim) and, per row, the
  // index into the route's state trace they estimate (-1 once finished).
  std::vector<nn::Tensor> state_estimates;
  std::vector<std::vector<int>> state_positions;
};

struct EdgeSampleOptions {
  int k2 = 1;
  bool greedy = false;  // argmax per set instead of sampling
  uint64_t rng_key = 0;
  // Teacher forcing: selections[j][k] replayed instead of sampled.
  const std::vector<std::vector<std::vector<int>>>* forced = nullptr;
};

struct EdgeSamples {
  // selections[j][k]: one edge index per consecutive pair of routes[j].
  std::vector<std::vector<std::vector<int>>> selections;
  nn::Tensor log_prob;  // (k1*k2) x 1, row j*k2+k; undefined for greedy stage
  // Per-edge log-probabilities in set order, with set boundaries.
  nn::Tensor edge_log_probs;
  std::vector<int> set_offsets;  // set s covers [offsets[s], offsets[s+1])
};

class NepfModel {
 public:
  explicit NepfModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  nn::Tensor pre_encode(const MultigraphInstance& instance, const ProblemSpec& spec) const;
  // Node features of GREAT layer `layer` applied to D.
  nn::Tensor great_node_features(int layer, const nn::Tensor& distances, int n) const;
  nn::Tensor encode(const nn::Tensor& distances, int n) const;
  EncodedInstance encode_instance(const MultigraphInstance& instance,
                                  const ProblemSpec& spec) const;

  // Hypernetwork output for bi-objective models, static weights otherwise.
  PointerWeights pointer_weights(const Preference& pref) const;

  NodeRollout rollout(const EncodedInstance& enc, const MultigraphInstance& instance,
                      const ProblemSpec& spec, const Preference& pref, const PointerWeights& w,
                      const RolloutOptions& options) const;

  EdgeSamples select_edges(const MultigraphInstance& instance, const ProblemSpec& spec,
                           const std::vector<std::vector<int>>& routes, const Preference& pref,
                           const PointerWeights& w, const EdgeSampleOptions& options) const;

  // Largest K1 for this variant and size.
  int max_starts(int n) const;

 private:
  nn::Tensor linear(const nn::Tensor& x, const std::string& name, bool bias = true) const;
  nn::Tensor affine_norm(const nn::Tensor& x, const std::string& name) const;
  nn::Tensor great_layer(int layer, const nn::Tensor& distances, int n) const;
  nn::Tensor transformer_layer(int layer, const nn::Tensor& h) const;
  const nn::Tensor& p(const std::string& name) const { return params_.get(name); }
  void add_param(const std::string& name, int rows, int cols, int fan_in);
  void add_fill(const std::string& name, int rows, int cols, double value);

  ModelConfig config_;
  nn::ParameterStore params_;
};

}  // namespace mgroute

#endif  // MGROUTE_MODEL_H_
