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

#include "mgroute/training.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mgroute/fsasp.h"
#include "mgroute/rng.h"

namespace mgroute {

using nn::Tensor;

namespace {

void write_atomically(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void save_model_atomically(const std::string& path, const NepfModel& model, const nn::Adam* adam) {
  const std::string tmp = path + ".tmp";
  save_model(tmp, model, adam);
  std::filesystem::rename(tmp, path);
}

double scalar_of(const RouteEvaluation& eval, const ProblemSpec& spec, const Preference& pref) {
  const std::vector<double> ideal(eval.objectives.size(), 0.0);
  return scalar_cost(eval, spec.variant, pref, ideal);
}

// Candidate edge selections for inference/validation: the per-set argmax plus
// optional samples; a single greedy-linear selection for the greedy stage.
std::vector<std::vector<std::vector<int>>> inference_selections(
    const NepfModel& model, const MultigraphInstance& instance, const ProblemSpec& spec,
    const std::vector<std::vector<int>>& routes, const Preference& pref, const PointerWeights& w,
    int k2, bool sample, uint64_t key) {
  EdgeSampleOptions argmax;
  argmax.k2 = 1;
  argmax.greedy = true;
  EdgeSamples best = model.select_edges(instance, spec, routes, pref, w, argmax);
  if (model.config().edge_stage == EdgeStage::kGreedy || !sample || k2 <= 0) return best.selections;
  EdgeSampleOptions sampled;
  sampled.k2 = k2;
  sampled.rng_key = key;
  EdgeSamples more = model.select_edges(instance, spec, routes, pref, w, sampled);
  for (size_t j = 0; j < routes.size(); ++j) {
    auto& dst = best.selections[j];
    dst.insert(dst.end(), more.selections[j].begin(), more.selections[j].end());
  }
  return best.selections;
}

Preference batch_preference(const NepfModel& model, uint64_t seed, int epoch, int batch) {
  if (!model.config().multi_objective) return Preference::bi(1.0);
  CounterRng rng(seed, {static_cast<uint64_t>(epoch), static_cast<uint64_t>(batch), 3});
  return Preference::bi(rng.uniform());
}

}  // namespace

void TrainConfig::validate(bool learned_edges) const {
  if (batch_size <= 0 || k1 < 0 || k2_eval <= 0 || epochs < 0 || instances_per_epoch <= 0 ||
      lr <= 0.0 || weight_decay < 0.0 || penalty < 0.0 || validation_size <= 0 ||
      calibration_samples <= 0) {
    throw std::invalid_argument("training configuration values must be positive");
  }
  if (learned_edges && k2_train < 2) throw std::invalid_argument("K2 must be at least 2");
  if (k2_train < 1) throw std::invalid_argument("K2 must be positive");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["batch_size"] = batch_size;
  j["k1"] = k1;
  j["k2_train"] = k2_train;
  j["k2_eval"] = k2_eval;
  j["epochs"] = epochs;
  j["instances_per_epoch"] = instances_per_epoch;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["penalty"] = penalty;
  j["seed"] = seed;
  j["validation_size"] = validation_size;
  j["calibration_samples"] = calibration_samples;
  j["grad_clip"] = grad_clip;
  return j.dump();
}

double reward(const RouteEvaluation& eval, const ProblemSpec& spec, const Preference& pref,
              double penalty) {
  return -scalar_of(eval, spec, pref) - penalty * eval.violation;
}

Advantages compute_advantages(const std::vector<std::vector<double>>& rewards) {
  Advantages a;
  const size_t k1 = rewards.size();
  if (k1 == 0) return a;
  for (const auto& r : rewards) {
    if (r.empty()) throw std::invalid_argument("every trajectory needs a reward");
    a.best.push_back(*std::max_element(r.begin(), r.end()));
  }
  double s = 0.0;
  for (double b : a.best) s += b;
  a.node_baseline = s / static_cast<double>(k1);
  for (double b : a.best) a.node.push_back(b - a.node_baseline);
  for (double x : a.node) a.node_sum += x;
  // Shifted mean: identical rewards give a baseline equal to each of them.
  for (const auto& r : rewards) {
    const double x0 = r[0];
    double d = 0.0;
    for (double x : r) d += x - x0;
    const double base = x0 + d / static_cast<double>(r.size());
    std::vector<double> adv;
    for (double x : r) adv.push_back(x - base);
    a.edge.push_back(std::move(adv));
  }
  return a;
}

StepStats hierarchical_step(NepfModel& model, nn::Adam* optimizer,
                            const std::vector<MultigraphInstance>& batch, const ProblemSpec& spec,
                            const Preference& pref, const TrainConfig& config,
                            const std::vector<uint64_t>& keys) {
  if (batch.empty() || keys.size() != batch.size()) throw std::invalid_argument("batch/keys mismatch");
  const int n = batch.front().num_nodes();
  for (const auto& g : batch) {
    if (g.num_nodes() != n) throw std::invalid_argument("instances in a batch must share N");
  }
  StepStats stats;
  model.params().zero_grad();
  const PointerWeights w = model.pointer_weights(pref);
  const bool learned = model.config().edge_stage == EdgeStage::kLearned;
  std::vector<Tensor> losses;
  double reward_sum = 0.0;
  int reward_count = 0;

  for (size_t i = 0; i < batch.size(); ++i) {
    const MultigraphInstance& g = batch[i];
    const EncodedInstance enc = model.encode_instance(g, spec);
    RolloutOptions ro;
    ro.k1 = config.k1;
    ro.rng_key = derive_key(keys[i], {1});
    const NodeRollout nodes = model.rollout(enc, g, spec, pref, w, ro);
    EdgeSampleOptions eo;
    eo.k2 = config.k2_train;
    eo.rng_key = derive_key(keys[i], {2});
    const EdgeSamples edges = model.select_edges(g, spec, nodes.routes, pref, w, eo);

    const size_t k1 = nodes.routes.size();
    std::vector<std::vector<double>> rewards(k1);
    std::vector<std::vector<RouteEvaluation>> evals(k1);
    for (size_t j = 0; j < k1; ++j) {
      for (const auto& sel : edges.selections[j]) {
        RouteEvaluation ev = evaluate_route(g, spec, Route{nodes.routes[j], sel});
        rewards[j].push_back(reward(ev, spec, pref, config.penalty));
        evals[j].push_back(std::move(ev));
      }
    }
    const Advantages adv = compute_advantages(rewards);

    double scale_r = 1.0;
    for (double b : adv.best) scale_r = std::max(scale_r, std::abs(b));
    const double tol = 1e-12 * static_cast<double>(k1) * scale_r;
    if (std::abs(adv.node_sum) > tol) {
      throw IdentityViolation("POMO advantages do not sum to zero: " + std::to_string(adv.node_sum));
    }
    stats.max_node_sum = std::max(stats.max_node_sum, std::abs(adv.node_sum));
    for (size_t j = 0; j < k1; ++j) {
      const auto& r = rewards[j];
      if (std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; })) {
        ++stats.zero_edge_batches;
        for (double a : adv.edge[j]) {
          if (a != 0.0) throw IdentityViolation("equal edge rewards gave a non-zero advantage");
        }
      }
    }
    ++stats.identity_checks;
    for (double b : adv.best) reward_sum += b;
    reward_count += static_cast<int>(k1);

    Tensor node_term = nn::scale(nn::sum(nn::mul(nodes.log_prob, Tensor::constant(static_cast<int>(k1), 1, adv.node))),
                                 1.0 / static_cast<double>(k1));
    Tensor loss = nn::scale(node_term, -1.0);
    if (learned) {
      std::vector<double> flat;
      for (const auto& e : adv.edge) flat.insert(flat.end(), e.begin(), e.end());
      const double denom = static_cast<double>(flat.size());
      Tensor edge_term = nn::scale(
          nn::sum(nn::mul(edges.log_prob, Tensor::constant(static_cast<int>(denom), 1, std::move(flat)))),
          1.0 / denom);
      loss = nn::sub(loss, edge_term);
    }
    if (model.config().state_estimator && !nodes.state_estimates.empty()) {
      std::vector<size_t> best_k(k1);
      for (size_t j = 0; j < k1; ++j) {
        best_k[j] = static_cast<size_t>(std::max_element(rewards[j].begin(), rewards[j].end()) - rewards[j].begin());
      }
      const int sd = model.config().state_dim();
      Tensor est;
      for (size_t t = 0; t < nodes.state_estimates.size(); ++t) {
        std::vector<double> target(k1 * sd, 0.0), weight(k1 * sd, 0.0);
        for (size_t j = 0; j < k1; ++j) {
          const int pos = nodes.state_positions[t][j];
          if (pos < 0) continue;
          const auto& trace = evals[j][best_k[j]].state_trace[pos];
          for (int c = 0; c < sd; ++c) {
            target[j * sd + c] = trace[c];
            weight[j * sd + c] = 1.0;
          }
        }
        Tensor diff = nn::sub(nodes.state_estimates[t], Tensor::constant(static_cast<int>(k1), sd, std::move(target)));
        Tensor term = nn::sum(nn::mul(nn::square(diff), Tensor::constant(static_cast<int>(k1), sd, std::move(weight))));
        est = est.defined() ? nn::add(est, term) : term;
      }
      est = nn::scale(est, 1.0 / static_cast<double>(k1));
      stats.est_loss += est.item();
      loss = nn::add(loss, est);
    }
    losses.push_back(loss);
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Tensor total = nn::scale(nn::sum(nn::concat_rows(losses)), inv_b);
  stats.loss = total.item();
  stats.est_loss *= inv_b;
  stats.mean_best_reward = reward_sum / std::max(1, reward_count);
  total.backward();

  double sq = 0.0;
  for (size_t i = 0; i < model.params().size(); ++i) {
    for (double x : model.params()[i].grad()) sq += x * x;
  }
  stats.grad_norm = std::sqrt(sq);
  if (!std::isfinite(stats.grad_norm)) throw nn::NonFiniteError("non-finite gradient norm");
  if (config.grad_clip > 0.0 && stats.grad_norm > config.grad_clip) {
    const double f = config.grad_clip / stats.grad_norm;
    for (size_t i = 0; i < model.params().size(); ++i) {
      for (double& x : model.params()[i].mutable_grad()) x *= f;
    }
  }
  if (optimizer) optimizer->step(model.params());
  return stats;
}

std::string EpochRecord::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["steps"] = steps;
  j["train_reward"] = train_reward;
  j["train_loss"] = train_loss;
  j["est_loss"] = est_loss;
  j["identity_checks"] = identity_checks;
  j["zero_edge_batches"] = zero_edge_batches;
  j["max_node_advantage_sum"] = max_node_sum;
  j["val_reward"] = validation.mean_reward;
  j["val_cost"] = validation.mean_cost;
  j["val_feasible_rate"] = validation.feasible_rate;
  j["val_best_feasible_rate"] = validation.best_feasible_rate;
  j["val_est_mse"] = validation.est_mse;
  return j.dump();
}

std::vector<MultigraphInstance> validation_instances(const TrainConfig& config, const GenConfig& gen) {
  std::vector<MultigraphInstance> out;
  for (int i = 0; i < config.validation_size; ++i) {
    GenConfig g = gen;
    g.seed = derive_key(config.seed, {0xFFFFFFFFULL, static_cast<uint64_t>(i)});
    out.push_back(generate(g));
  }
  return out;
}

ValidationStats validate_model(const NepfModel& model, const std::vector<MultigraphInstance>& instances,
                               const ProblemSpec& spec, const TrainConfig& config) {
  nn::NoGradGuard no_grad;
  ValidationStats v;
  const Preference pref = model.config().multi_objective ? Preference::bi(0.5) : Preference::bi(1.0);
  const PointerWeights w = model.pointer_weights(pref);
  int rollouts = 0, feasible = 0, best_feasible = 0;
  double est_sq = 0.0;
  int est_count = 0;
  for (size_t i = 0; i < instances.size(); ++i) {
    const auto& g = instances[i];
    const EncodedInstance enc = model.encode_instance(g, spec);
    RolloutOptions ro;
    ro.k1 = config.k1;
    ro.greedy = true;
    const NodeRollout nodes = model.rollout(enc, g, spec, pref, w, ro);
    const auto selections = inference_selections(model, g, spec, nodes.routes, pref, w, config.k2_eval,
                                                 true, derive_key(config.seed, {0xFFFFFFFEULL, i}));
    double best = -kInfinity, best_cost = 0.0;
    bool best_ok = false;
    for (size_t j = 0; j < nodes.routes.size(); ++j) {
      double rj = -kInfinity;
      const RouteEvaluation* ej = nullptr;
      std::vector<RouteEvaluation> evs;
      evs.reserve(selections[j].size());
      for (const auto& sel : selections[j]) {
        evs.push_back(evaluate_route(g, spec, Route{nodes.routes[j], sel}));
        const double r = reward(evs.back(), spec, pref, config.penalty);
        if (r > rj) {
          rj = r;
          ej = &evs.back();
        }
      }
      ++rollouts;
      if (ej->violation == 0.0) ++feasible;
      for (size_t t = 0; t < nodes.state_estimates.size(); ++t) {
        const int pos = nodes.state_positions[t][j];
        if (pos < 0) continue;
        const int sd = nodes.state_estimates[t].cols();
        for (int c = 0; c < sd; ++c) {
          const double diff = nodes.state_estimates[t].at(static_cast<int>(j), c) - ej->state_trace[pos][c];
          est_sq += diff * diff;
          ++est_count;
        }
      }
      if (rj > best) {
        best = rj;
        best_cost = scalar_of(*ej, spec, pref);
        best_ok = ej->violation == 0.0;
      }
    }
    v.mean_reward += best;
    v.mean_cost += best_cost;
    if (best_ok) ++best_feasible;
  }
  const double m = static_cast<double>(std::max<size_t>(1, instances.size()));
  v.mean_reward /= m;
  v.mean_cost /= m;
  v.feasible_rate = static_cast<double>(feasible) / std::max(1, rollouts);
  v.best_feasible_rate = best_feasible / m;
  v.est_mse = est_count ? est_sq / est_count : 0.0;
  return v;
}

TrainResult train(NepfModel& model, const TrainConfig& config, const GenConfig& gen,
                  const std::string& out_dir, std::ostream* progress) {
  const bool learned = model.config().edge_stage == EdgeStage::kLearned;
  config.validate(learned);
  gen.validate();
  if (gen.variant != model.config().variant) throw SpecMismatch("generator and model variants differ");
  TrainResult result;
  result.spec = calibrate_thresholds(gen, config.calibration_samples);
  const ProblemSpec& spec = result.spec;
  const auto val = validation_instances(config, gen);
  nn::Adam adam(nn::AdamConfig{config.lr, config.weight_decay});

  std::string jsonl;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json manifest;
    manifest["model"] = nlohmann::json::parse(model.config().to_json());
    manifest["train"] = nlohmann::json::parse(config.to_json());
    manifest["gen"] = {{"variant", variant_name(gen.variant)}, {"distribution", gen.distribution_tag()},
                       {"n", gen.n}, {"seed", gen.seed}};
    manifest["spec"] = {{"capacity", spec.capacity}, {"resource_limit", spec.resource_limit},
                        {"threshold1", spec.threshold1}, {"threshold2", spec.threshold2}};
    write_atomically(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  }
  auto record = [&](EpochRecord rec) {
    const std::string line = rec.to_json();
    if (progress) *progress << line << std::endl;
    jsonl += line + "\n";
    if (!out_dir.empty()) write_atomically(out_dir + "/metrics.jsonl", jsonl);
    result.log.push_back(std::move(rec));
  };

  EpochRecord initial;
  initial.validation = validate_model(model, val, spec, config);
  result.best_validation = initial.validation.mean_reward;
  record(initial);
  if (!out_dir.empty()) save_model_atomically(out_dir + "/best.ckpt", model, &adam);

  int64_t steps = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    int batch_index = 0;
    double loss_sum = 0.0, reward_sum = 0.0, est_sum = 0.0;
    for (int start = 0; start < config.instances_per_epoch; start += config.batch_size, ++batch_index) {
      const int count = std::min(config.batch_size, config.instances_per_epoch - start);
      std::vector<MultigraphInstance> batch;
      std::vector<uint64_t> keys;
      for (int i = start; i < start + count; ++i) {
        GenConfig g = gen;
        g.seed = derive_key(config.seed, {static_cast<uint64_t>(epoch), static_cast<uint64_t>(i)});
        batch.push_back(generate(g));
        keys.push_back(derive_key(config.seed, {static_cast<uint64_t>(epoch), static_cast<uint64_t>(i), 7}));
      }
      const Preference pref = batch_preference(model, config.seed, epoch, batch_index);
      const StepStats s = hierarchical_step(model, &adam, batch, spec, pref, config, keys);
      ++steps;
      loss_sum += s.loss;
      reward_sum += s.mean_best_reward;
      est_sum += s.est_loss;
      rec.identity_checks += s.identity_checks;
      rec.zero_edge_batches += s.zero_edge_batches;
      rec.max_node_sum = std::max(rec.max_node_sum, s.max_node_sum);
    }
    rec.steps = steps;
    rec.train_loss = loss_sum / batch_index;
    rec.train_reward = reward_sum / batch_index;
    rec.est_loss = est_sum / batch_index;
    rec.validation = validate_model(model, val, spec, config);
    if (rec.validation.mean_reward > result.best_validation) {
      result.best_validation = rec.validation.mean_reward;
      result.best_epoch = epoch;
      if (!out_dir.empty()) save_model_atomically(out_dir + "/best.ckpt", model, &adam);
    }
    record(rec);
  }
  if (!out_dir.empty()) save_model_atomically(out_dir + "/last.ckpt", model, &adam);
  return result;
}

std::vector<double> augmentation_scales(int aug_index, int attr_dim) {
  if (aug_index < 0 || aug_index >= 8) throw std::invalid_argument("augmentation index must be in [0, 8)");
  std::vector<double> s(attr_dim);
  for (int k = 0; k < attr_dim; ++k) s[k] = kAugFactors[(aug_index * (k + 1)) % 8];
  return s;
}

std::vector<Candidate> nepf_candidates(const NepfModel& model, const MultigraphInstance& instance,
                                       const ProblemSpec& spec, const Preference& pref,
                                       const InferenceOptions& options, double penalty) {
  if (options.aug < 1 || options.aug > 8) throw std::invalid_argument("aug must be in 1..8");
  nn::NoGradGuard no_grad;
  const PointerWeights w = model.pointer_weights(pref);
  std::vector<Candidate> out;
  for (int a = 0; a < options.aug; ++a) {
    const MultigraphInstance search =
        a == 0 ? instance : instance.scaled(augmentation_scales(a, instance.attr_dim()));
    const EncodedInstance enc = model.encode_instance(search, spec);
    RolloutOptions ro;
    ro.k1 = options.k1;
    ro.greedy = true;
    const NodeRollout nodes = model.rollout(enc, search, spec, pref, w, ro);
    const auto selections = inference_selections(model, search, spec, nodes.routes, pref, w, options.k2,
                                                 options.sample_edges,
                                                 derive_key(options.seed, {static_cast<uint64_t>(a)}));
    for (size_t j = 0; j < nodes.routes.size(); ++j) {
      for (const auto& sel : selections[j]) {
        Candidate c;
        c.route = Route{nodes.routes[j], sel};
        c.eval = evaluate_route(instance, spec, c.route);
        c.reward = reward(c.eval, spec, pref, penalty);
        out.push_back(std::move(c));
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Candidate& x, const Candidate& y) { return x.reward > y.reward; });
  return out;
}

Candidate nepf_solve(const NepfModel& model, const MultigraphInstance& instance, const ProblemSpec& spec,
                     const Preference& pref, const InferenceOptions& options, double penalty) {
  auto all = nepf_candidates(model, instance, spec, pref, options, penalty);
  return std::move(all.front());
}

void save_model(const std::string& path, const NepfModel& model, const nn::Adam* adam) {
  nn::save_checkpoint(path, model.params(), adam, model.config().to_json());
}

NepfModel load_model(const std::string& path) {
  NepfModel model(ModelConfig::from_json(nn::read_checkpoint_metadata(path)));
  nn::load_checkpoint(path, model.params(), nullptr, nullptr);
  return model;
}

}  // namespace mgroute
