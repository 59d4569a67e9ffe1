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

// Replays sampled trajectories with teacher forcing so the training loss
// becomes a deterministic function of the parameters.

#ifndef MGROUTE_REPLAY_H_
#define MGROUTE_REPLAY_H_

#include <algorithm>
#include <vector>

#include "mgroute/model.h"
#include "mgroute/rng.h"
#include "mgroute/training.h"

namespace mgroute::oracle {

struct Replay {
  std::vector<std::vector<int>> routes;
  std::vector<std::vector<std::vector<int>>> selections;
  std::vector<double> node_adv;
  std::vector<double> edge_adv;  // j * k2 + k
  // Estimator targets per decision step, k1 x state_dim, with 0/1 weights.
  std::vector<std::vector<double>> est_target, est_weight;
};

inline Replay sample_replay(const NepfModel& model, const MultigraphInstance& g, const ProblemSpec& spec,
                            const Preference& pref, int k1, int k2, uint64_t key, double penalty = 10.0) {
  Replay r;
  const PointerWeights w = model.pointer_weights(pref);
  const EncodedInstance enc = model.encode_instance(g, spec);
  RolloutOptions ro;
  ro.k1 = k1;
  ro.rng_key = derive_key(key, {1});
  const NodeRollout nodes = model.rollout(enc, g, spec, pref, w, ro);
  EdgeSampleOptions eo;
  eo.k2 = k2;
  eo.rng_key = derive_key(key, {2});
  const EdgeSamples edges = model.select_edges(g, spec, nodes.routes, pref, w, eo);
  r.routes = nodes.routes;
  r.selections = edges.selections;
  std::vector<std::vector<double>> rewards(r.routes.size());
  std::vector<std::vector<RouteEvaluation>> evals(r.routes.size());
  for (size_t j = 0; j < r.routes.size(); ++j) {
    for (const auto& sel : r.selections[j]) {
      evals[j].push_back(evaluate_route(g, spec, Route{r.routes[j], sel}));
      rewards[j].push_back(reward(evals[j].back(), spec, pref, penalty));
    }
  }
  const Advantages adv = compute_advantages(rewards);
  r.node_adv = adv.node;
  for (const auto& e : adv.edge) r.edge_adv.insert(r.edge_adv.end(), e.begin(), e.end());
  const int sd = model.config().state_dim();
  if (!model.config().state_estimator) return r;
  for (size_t t = 0; t < nodes.state_positions.size(); ++t) {
    std::vector<double> target(r.routes.size() * sd, 0.0), weight(target.size(), 0.0);
    for (size_t j = 0; j < r.routes.size(); ++j) {
      const int pos = nodes.state_positions[t][j];
      if (pos < 0) continue;
      const size_t best = std::max_element(rewards[j].begin(), rewards[j].end()) - rewards[j].begin();
      for (int c = 0; c < sd; ++c) {
        target[j * sd + c] = evals[j][best].state_trace[pos][c];
        weight[j * sd + c] = 1.0;
      }
    }
    r.est_target.push_back(std::move(target));
    r.est_weight.push_back(std::move(weight));
  }
  return r;
}

// Per-instance training loss with the recorded trajectories and advantages.
inline nn::Tensor replay_loss(const NepfModel& model, const MultigraphInstance& g, const ProblemSpec& spec,
                              const Preference& pref, const Replay& r) {
  const PointerWeights w = model.pointer_weights(pref);
  const EncodedInstance enc = model.encode_instance(g, spec);
  RolloutOptions ro;
  ro.forced = &r.routes;
  const NodeRollout nodes = model.rollout(enc, g, spec, pref, w, ro);
  const int k1 = static_cast<int>(r.routes.size());
  nn::Tensor loss = nn::scale(nn::sum(nn::mul(nodes.log_prob, nn::Tensor::constant(k1, 1, r.node_adv))),
                              -1.0 / k1);
  if (model.config().edge_stage == EdgeStage::kLearned) {
    EdgeSampleOptions eo;
    eo.forced = &r.selections;
    const EdgeSamples edges = model.select_edges(g, spec, r.routes, pref, w, eo);
    const int total = static_cast<int>(r.edge_adv.size());
    loss = nn::sub(loss, nn::scale(nn::sum(nn::mul(edges.log_prob, nn::Tensor::constant(total, 1, r.edge_adv))),
                                   1.0 / total));
  }
  if (!model.config().state_estimator) return loss;
  const int sd = model.config().state_dim();
  for (size_t t = 0; t < nodes.state_estimates.size(); ++t) {
    nn::Tensor diff = nn::sub(nodes.state_estimates[t], nn::Tensor::constant(k1, sd, r.est_target[t]));
    loss = nn::add(loss, nn::scale(nn::sum(nn::mul(nn::square(diff), nn::Tensor::constant(k1, sd, r.est_weight[t]))),
                                   1.0 / k1));
  }
  return loss;
}

// Small learned-edge model with hypernets where the variant has them.
inline ModelConfig tiny_config(Variant variant, int d = 8, int heads = 2) {
  ModelConfig c = ModelConfig::for_variant(variant);
  c.d = d;
  c.d_edge = d;
  c.great_layers = 2;
  c.transformer_layers = 1;
  c.heads = heads;
  c.ffn_hidden = 2 * d;
  c.hyper_hidden = 16;
  c.init_seed = 5;
  return c;
}

}  // namespace mgroute::oracle

#endif  // MGROUTE_REPLAY_H_
