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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mgroute/instancegen.h"
#include "mgroute/model.h"
#include "mgroute/oracles.h"
#include "mgroute/replay.h"
#include "mgroute/training.h"

namespace mgroute {
namespace {

using oracle::tiny_config;

const Variant kAll[] = {Variant::kMOTSP, Variant::kMOCVRP, Variant::kMOTSPTW,
                        Variant::kRCTSP, Variant::kOP,     Variant::kMOOP};

struct Case {
  MultigraphInstance g;
  ProblemSpec spec;
};

Case make_case(Variant v, int n, uint64_t seed) {
  GenConfig c;
  c.variant = v;
  c.n = n;
  c.seed = seed;
  ProblemSpec spec = calibrate_thresholds(c, 20);
  return {generate(c), spec};
}

MultigraphInstance with_sets(const MultigraphInstance& g, const MultigraphInstance::EdgeSets& sets) {
  return MultigraphInstance(g.num_nodes(), g.attr_dim(), sets, g.node_attrs());
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  EXPECT_EQ(a.size(), b.size());
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// row (1 x r) times W (r x c) plus optional bias, in plain loops.
std::vector<double> affine(const std::vector<double>& x, const nn::Tensor& w, const nn::Tensor* b) {
  std::vector<double> y(w.cols(), 0.0);
  for (int c = 0; c < w.cols(); ++c) {
    for (int r = 0; r < w.rows(); ++r) y[c] += x[r] * w.at(r, c);
    if (b) y[c] += b->at(0, c);
  }
  return y;
}

std::vector<double> relu(std::vector<double> x) {
  for (double& v : x) v = std::max(v, 0.0);
  return x;
}

TEST(Model, PreEncodeIgnoresEdgeOrder) {
  const Case c = make_case(Variant::kMOTSP, 7, 3);
  NepfModel model(tiny_config(Variant::kMOTSP));
  auto sets = c.g.edge_sets();
  for (auto& s : sets) std::reverse(s.begin(), s.end());
  const nn::Tensor a = model.pre_encode(c.g, c.spec);
  const nn::Tensor b = model.pre_encode(with_sets(c.g, sets), c.spec);
  EXPECT_LT(max_abs_diff(a.data(), b.data()), 1e-12);
}

TEST(Model, PreEncodeMatchesDeepSetByHand) {
  const int n = 3;
  // (0,1) has one edge, (1,0) the same edge twice.
  auto g = oracle::make_instance(n, [](int u, int v) -> std::vector<std::vector<double>> {
    if (u == 1 && v == 0) return {{0.3, 0.7}, {0.3, 0.7}};
    if (u == 0 && v == 1) return {{0.3, 0.7}};
    return {{0.5, 0.5}};
  });
  ProblemSpec spec;
  spec.variant = Variant::kMOTSP;
  NepfModel model(tiny_config(Variant::kMOTSP));
  const auto& P = model.params();
  const nn::Tensor out = model.pre_encode(g, spec);
  auto phi = [&](const std::vector<double>& f) {
    auto x = affine(f, P.get("pre.w_g"), nullptr);
    x = relu(affine(x, P.get("pre.phi1.w"), &P.get("pre.phi1.b")));
    return affine(x, P.get("pre.phi2.w"), &P.get("pre.phi2.b"));
  };
  auto rho = [&](const std::vector<double>& x) {
    return affine(relu(affine(x, P.get("pre.rho1.w"), &P.get("pre.rho1.b"))), P.get("pre.rho2.w"),
                  &P.get("pre.rho2.b"));
  };
  const auto single = phi({0.3, 0.7});
  std::vector<double> doubled = single;
  for (double& x : doubled) x *= 2.0;
  const int d = model.config().d;
  const auto want01 = rho(single), want10 = rho(doubled);
  for (int k = 0; k < d; ++k) {
    EXPECT_NEAR(out.at(0 * n + 1, k), want01[k], 1e-12);
    EXPECT_NEAR(out.at(1 * n + 0, k), want10[k], 1e-12);
  }
}

TEST(Model, EncoderIsEquivariantUnderRelabeling) {
  const Case c = make_case(Variant::kMOTSP, 6, 11);
  NepfModel model(tiny_config(Variant::kMOTSP));
  const int n = c.g.num_nodes();
  CounterRng rng(4, {});
  const auto pi = oracle::random_permutation(n, rng);
  const auto sets = c.g.edge_sets();
  MultigraphInstance::EdgeSets permuted(sets.size());
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) permuted[pi[u] * n + pi[v]] = sets[u * n + v];
  }
  const auto a = model.encode_instance(c.g, c.spec);
  const auto b = model.encode_instance(with_sets(c.g, permuted), c.spec);
  const int d = model.config().d;
  for (int u = 0; u < n; ++u) {
    for (int k = 0; k < d; ++k) EXPECT_NEAR(a.nodes.at(u, k), b.nodes.at(pi[u], k), 1e-9);
  }
}

TEST(Model, GreatNodeFeaturesByHand) {
  ModelConfig cfg = tiny_config(Variant::kMOTSP, 2, 1);
  NepfModel model(cfg);
  const auto& P = model.params();
  const nn::Tensor& gate_out = P.get("great0.gate_out");
  const nn::Tensor& gate_in = P.get("great0.gate_in");
  const nn::Tensor& w_out = P.get("great0.w_out");
  const nn::Tensor& w_in = P.get("great0.w_in");
  for (int n : {2, 3}) {
    CounterRng rng(n, {});
    const auto dv = oracle::random_values(n * n * 2, rng, -1.0, 1.0);
    const nn::Tensor D = nn::Tensor::constant(n * n, 2, dv);
    const nn::Tensor x = model.great_node_features(0, D, n);
    auto row = [&](int u, int v) { return std::vector<double>{dv[(u * n + v) * 2], dv[(u * n + v) * 2 + 1]}; };
    for (int u = 0; u < n; ++u) {
      std::vector<double> s_out, s_in;
      for (int v = 0; v < n; ++v) {
        if (v == u) continue;
        s_out.push_back(affine(row(u, v), gate_out, nullptr)[0]);
        s_in.push_back(affine(row(v, u), gate_in, nullptr)[0]);
      }
      auto norm = [](std::vector<double> s) {
        const double mx = *std::max_element(s.begin(), s.end());
        double z = 0.0;
        for (double& x : s) z += (x = std::exp(x - mx));
        for (double& x : s) x /= z;
        return s;
      };
      const auto a1 = norm(s_out), a2 = norm(s_in);
      std::vector<double> out_part(w_out.cols(), 0.0), in_part(w_in.cols(), 0.0);
      int i = 0;
      for (int v = 0; v < n; ++v) {
        if (v == u) continue;
        const auto o = affine(row(u, v), w_out, nullptr);
        const auto q = affine(row(v, u), w_in, nullptr);
        for (size_t k = 0; k < o.size(); ++k) out_part[k] += a1[i] * o[k];
        for (size_t k = 0; k < q.size(); ++k) in_part[k] += a2[i] * q[k];
        ++i;
      }
      ASSERT_EQ(x.cols(), static_cast<int>(out_part.size() + in_part.size()));
      for (size_t k = 0; k < out_part.size(); ++k) EXPECT_NEAR(x.at(u, k), out_part[k], 1e-12);
      for (size_t k = 0; k < in_part.size(); ++k) EXPECT_NEAR(x.at(u, out_part.size() + k), in_part[k], 1e-12);
    }
  }
}

TEST(Model, ClippedLogProbsUniformAndMasked) {
  const nn::Tensor scores = nn::Tensor::constant(1, 4, {0.3, 0.3, 0.3, 0.3});
  const nn::Tensor beta = nn::Tensor::scalar(1.0);
  const std::vector<char> all{1, 1, 1, 1};
  const auto lp = clipped_log_probs(scores, {}, beta, 50.0, all);
  for (double x : lp.data()) EXPECT_NEAR(x, std::log(0.25), 1e-12);
  const std::vector<char> some{1, 0, 1, 0};
  const auto lm = clipped_log_probs(scores, {}, beta, 50.0, some);
  EXPECT_NEAR(lm.at(0, 0), std::log(0.5), 1e-12);
  EXPECT_NEAR(lm.at(0, 2), std::log(0.5), 1e-12);
  EXPECT_LT(std::exp(lm.at(0, 1)), 1e-300);
  EXPECT_LT(std::exp(lm.at(0, 3)), 1e-300);
}

TEST(Model, PointerScoreByHand) {
  const nn::Tensor q = nn::Tensor::constant(1, 1, {1.0});
  const nn::Tensor k = nn::Tensor::constant(2, 1, {1.0, -1.0});
  const nn::Tensor one = nn::Tensor::constant(1, 1, {1.0});
  const nn::Tensor s = multi_pointer_scores(q, k, one, one, 1, 1);
  EXPECT_DOUBLE_EQ(s.at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.at(0, 1), -1.0);
  const std::vector<char> all{1, 1};
  const auto lp = clipped_log_probs(s, {}, nn::Tensor::scalar(1.0), 0.0, all);
  EXPECT_NEAR(std::exp(lp.at(0, 0)), 0.880797, 1e-6);
  EXPECT_NEAR(std::exp(lp.at(0, 1)), 0.119203, 1e-6);
  // Two heads of width 2 averaged, scaled by 1/(H sqrt(d)) = 1/(2*2).
  const nn::Tensor q2 = nn::Tensor::constant(1, 4, {1, 2, 3, 4});
  const nn::Tensor k2 = nn::Tensor::constant(1, 4, {1, 1, 1, 1});
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  const nn::Tensor I = nn::Tensor::constant(4, 4, eye);
  EXPECT_DOUBLE_EQ(multi_pointer_scores(q2, k2, I, I, 2, 4).item(), 10.0 / 4.0);
}

TEST(Model, EdgeScoreByHand) {
  // q=2, k=3, cost 1, beta 0.5: raw 5.5. A second edge with k=1, cost 0 scores 2.
  const nn::Tensor one = nn::Tensor::constant(1, 1, {1.0});
  const nn::Tensor s = multi_pointer_scores(nn::Tensor::constant(1, 1, {2.0}),
                                            nn::Tensor::constant(2, 1, {3.0, 1.0}), one, one, 1, 1);
  const std::vector<char> all{1, 1};
  const auto lp = clipped_log_probs(s, nn::Tensor::constant(1, 2, {1.0, 0.0}), nn::Tensor::scalar(0.5), 0.0, all);
  EXPECT_NEAR(lp.at(0, 0) - lp.at(0, 1), 5.5 - 2.0, 1e-12);
  EXPECT_NEAR(std::exp(lp.at(0, 0)), 1.0 / (1.0 + std::exp(-3.5)), 1e-12);
}

TEST(Model, CostScaleTradesWithBeta) {
  CounterRng rng(2, {});
  const auto s = nn::Tensor::constant(2, 3, oracle::random_values(6, rng, -2, 2));
  const auto cost = oracle::random_values(6, rng, 0, 3);
  std::vector<double> scaled = cost;
  for (double& x : scaled) x *= 3.0;
  const std::vector<char> all(6, 1);
  const auto a = clipped_log_probs(s, nn::Tensor::constant(2, 3, scaled), nn::Tensor::scalar(0.7), 50.0, all);
  const auto b = clipped_log_probs(s, nn::Tensor::constant(2, 3, cost), nn::Tensor::scalar(2.1), 50.0, all);
  EXPECT_LT(max_abs_diff(a.data(), b.data()), 1e-12);
}

TEST(Model, BetaZeroIgnoresEdgeScale) {
  const Case c = make_case(Variant::kMOTSP, 8, 5);
  NepfModel model(tiny_config(Variant::kMOTSP));
  model.params().get("dec.beta").mutable_data()[0] = 0.0;
  auto sets = c.g.edge_sets();
  for (auto& s : sets) {
    for (auto& e : s) {
      e[0] *= 4.0;
      e[1] *= 0.25;
    }
  }
  const MultigraphInstance scaled = with_sets(c.g, sets);
  const Preference pref = Preference::bi(0.3);
  const auto w = model.pointer_weights(pref);
  const auto enc = model.encode_instance(c.g, c.spec);
  RolloutOptions ro;
  ro.greedy = true;
  const auto a = model.rollout(enc, c.g, c.spec, pref, w, ro);
  const auto b = model.rollout(enc, scaled, c.spec, pref, w, ro);
  EXPECT_EQ(a.routes, b.routes);
  EXPECT_LT(max_abs_diff(a.log_prob.data(), b.log_prob.data()), 1e-12);
}

TEST(Model, FsaspCostTerm) {
  const std::vector<double> e{2.0, 3.0};
  const Preference pref = Preference::bi(0.4);
  EXPECT_NEAR(fsasp_cost_term(e, Variant::kMOTSP, pref), 2.6, 1e-12);
  EXPECT_NEAR(fsasp_cost_term(e, Variant::kMOTSP, pref), linear_cost(e, pref), 1e-12);
  EXPECT_DOUBLE_EQ(fsasp_cost_term(e, Variant::kRCTSP, Preference({1.0})), 2.0);
  EXPECT_DOUBLE_EQ(fsasp_cost_term(e, Variant::kOP, Preference({1.0})), 2.0);
}

TEST(Model, EstimatorFollowsLstm) {
  const Case c = make_case(Variant::kOP, 7, 8);
  NepfModel model(tiny_config(Variant::kOP));
  const Preference pref({1.0});
  const auto w = model.pointer_weights(pref);
  const auto enc = model.encode_instance(c.g, c.spec);
  RolloutOptions ro;
  ro.k1 = 3;
  ro.rng_key = 9;
  const auto out = model.rollout(enc, c.g, c.spec, pref, w, ro);
  ASSERT_FALSE(out.state_estimates.empty());
  const auto& P = model.params();
  const int d = model.config().d;
  nn::LstmState st{nn::Tensor::zeros(3, d), nn::Tensor::zeros(3, d)};
  for (int t = 0; t < 2; ++t) {
    std::vector<int> idx{out.routes[0][t], out.routes[1][t], out.routes[2][t]};
    st = nn::lstm_cell(nn::gather_rows(enc.nodes, idx), st, P.get("est.w_ih"), P.get("est.w_hh"), P.get("est.b"));
  }
  const nn::Tensor first = nn::matmul(st.h, P.get("est.w_state"));
  EXPECT_LT(max_abs_diff(first.data(), out.state_estimates[0].data()), 1e-12);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(out.state_positions[0][j], 1);

  for (double& x : model.params().get("est.w_state").mutable_data()) x = 0.0;
  const auto zero = model.rollout(enc, c.g, c.spec, pref, w, ro);
  for (const auto& s : zero.state_estimates) {
    for (double x : s.data()) EXPECT_EQ(x, 0.0);
  }
}

TEST(Model, RolloutsAreValidForEveryVariant) {
  for (Variant v : kAll) {
    SCOPED_TRACE(variant_name(v));
    const Case c = make_case(v, 8, 21);
    NepfModel model(tiny_config(v));
    const Preference pref = is_multi_objective(v) ? Preference::bi(0.6) : Preference({1.0});
    const auto w = model.pointer_weights(pref);
    const auto enc = model.encode_instance(c.g, c.spec);
    RolloutOptions ro;
    ro.rng_key = 77;
    const auto out = model.rollout(enc, c.g, c.spec, pref, w, ro);
    ASSERT_EQ(static_cast<int>(out.routes.size()), model.max_starts(8));
    for (size_t j = 0; j < out.routes.size(); ++j) {
      EXPECT_NO_THROW(validate_node_sequence(c.g, v, out.routes[j]));
      double s = 0.0;
      for (double p : out.step_probs[j]) s += std::log(p);
      EXPECT_NEAR(s, out.log_prob.at(static_cast<int>(j), 0), 1e-10);
    }
    EdgeSampleOptions eo;
    eo.k2 = 3;
    eo.rng_key = 5;
    const auto edges = model.select_edges(c.g, c.spec, out.routes, pref, w, eo);
    for (size_t j = 0; j < out.routes.size(); ++j) {
      for (const auto& sel : edges.selections[j]) {
        EXPECT_NO_THROW(validate_route(c.g, v, Route{out.routes[j], sel}));
      }
    }
    // Teacher forcing reproduces the sampled log-probabilities.
    RolloutOptions forced;
    forced.forced = &out.routes;
    const auto replay = model.rollout(enc, c.g, c.spec, pref, w, forced);
    EXPECT_LT(max_abs_diff(replay.log_prob.data(), out.log_prob.data()), 1e-12);
  }
}

TEST(Model, GreedyRolloutIsReproducible) {
  const Case c = make_case(Variant::kRCTSP, 9, 2);
  NepfModel model(tiny_config(Variant::kRCTSP));
  const Preference pref({1.0});
  const auto w = model.pointer_weights(pref);
  const auto enc = model.encode_instance(c.g, c.spec);
  RolloutOptions ro;
  ro.k1 = 1;
  ro.greedy = true;
  const auto a = model.rollout(enc, c.g, c.spec, pref, w, ro);
  ro.rng_key = 1234;
  const auto b = model.rollout(enc, c.g, c.spec, pref, w, ro);
  EXPECT_EQ(a.routes, b.routes);
  EXPECT_EQ(a.log_prob.item(), b.log_prob.item());
  // Every greedy step takes the most likely node.
  RolloutOptions s;
  s.k1 = 1;
  s.rng_key = 3;
  EXPECT_NO_THROW(model.rollout(enc, c.g, c.spec, pref, w, s));
}

TEST(Model, GreedyEdgeStageIsIdempotent) {
  const Case c = make_case(Variant::kMOTSP, 7, 6);
  NepfModel model(tiny_config(Variant::kMOTSP));
  const Preference pref = Preference::bi(0.2);
  const auto w = model.pointer_weights(pref);
  const auto enc = model.encode_instance(c.g, c.spec);
  RolloutOptions ro;
  ro.greedy = true;
  const auto nodes = model.rollout(enc, c.g, c.spec, pref, w, ro);
  EdgeSampleOptions eo;
  const auto a = model.select_edges(c.g, c.spec, nodes.routes, pref, w, eo);
  const auto b = model.select_edges(c.g, c.spec, nodes.routes, pref, w, eo);
  EXPECT_EQ(a.selections, b.selections);
  EXPECT_FALSE(a.log_prob.defined());
  for (size_t j = 0; j < nodes.routes.size(); ++j) {
    EXPECT_EQ(a.selections[j][0], fsasp_greedy_linear(c.g, nodes.routes[j], pref));
  }
}

TEST(Model, SingletonSetsHaveZeroLogProb) {
  GenConfig gc;
  gc.variant = Variant::kRCTSP;
  gc.n = 6;
  gc.max_edges = 1;
  gc.distribution = Distribution::kFix;
  const MultigraphInstance g = generate(gc);
  ProblemSpec spec = calibrate_thresholds(gc, 10);
  NepfModel model(tiny_config(Variant::kRCTSP));
  const Preference pref({1.0});
  const auto w = model.pointer_weights(pref);
  const auto enc = model.encode_instance(g, spec);
  RolloutOptions ro;
  ro.rng_key = 1;
  const auto nodes = model.rollout(enc, g, spec, pref, w, ro);
  EdgeSampleOptions eo;
  eo.k2 = 4;
  eo.rng_key = 2;
  const auto edges = model.select_edges(g, spec, nodes.routes, pref, w, eo);
  for (const auto& per_route : edges.selections) {
    for (const auto& sel : per_route) {
      for (int l : sel) EXPECT_EQ(l, 0);
    }
  }
  for (double x : edges.log_prob.data()) EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(Model, EdgeSamplingMatchesProbabilities) {
  GenConfig gc;
  gc.variant = Variant::kRCTSP;
  gc.n = 5;
  gc.max_edges = 4;
  gc.distribution = Distribution::kFix;
  const MultigraphInstance g = generate(gc);
  ProblemSpec spec = calibrate_thresholds(gc, 10);
  ModelConfig cfg = tiny_config(Variant::kRCTSP);
  cfg.clip_edge = 0.0;  // spread the distribution out
  NepfModel model(cfg);
  for (double& x : model.params().get("edge.wq").mutable_data()) x *= 8.0;
  const Preference pref({1.0});
  const auto w = model.pointer_weights(pref);
  const std::vector<std::vector<int>> routes{{0, 2, 4, 1, 3, 0}};
  EdgeSampleOptions eo;
  eo.k2 = 100000;
  eo.rng_key = 42;
  const auto edges = model.select_edges(g, spec, routes, pref, w, eo);
  const auto lp = edges.edge_log_probs.data();
  for (size_t s = 0; s + 1 < edges.set_offsets.size(); ++s) {
    const int lo = edges.set_offsets[s], hi = edges.set_offsets[s + 1];
    std::vector<int> count(hi - lo, 0);
    for (const auto& sel : edges.selections[0]) ++count[sel[s]];
    for (int l = 0; l < hi - lo; ++l) {
      EXPECT_NEAR(count[l] / 1e5, std::exp(lp[lo + l]), 0.01);
    }
  }
}

TEST(Model, HypernetworkDependsOnPreference) {
  NepfModel model(tiny_config(Variant::kMOOP));
  const auto a = model.pointer_weights(Preference::bi(1.0));
  const auto b = model.pointer_weights(Preference::bi(0.0));
  const int d = model.config().d, de = model.config().d_edge;
  for (const auto* w : {&a, &b}) {
    EXPECT_EQ(w->node_q.rows(), d);
    EXPECT_EQ(w->node_q.cols(), d);
    EXPECT_EQ(w->edge_k.rows(), de);
    EXPECT_EQ(w->edge_k.cols(), de);
  }
  EXPECT_GT(max_abs_diff(a.node_q.data(), b.node_q.data()), 1e-6);
  EXPECT_GT(max_abs_diff(a.edge_k.data(), b.edge_k.data()), 1e-6);

  NepfModel so(tiny_config(Variant::kRCTSP));
  for (size_t i = 0; i < so.params().size(); ++i) {
    EXPECT_NE(so.params().name(i).rfind("hyper", 0), 0u) << so.params().name(i);
  }
}

TEST(Model, ConfigJsonRoundTrip) {
  for (Variant v : kAll) {
    ModelConfig c = tiny_config(v);
    c.clip_node = 12.5;
    c.init_seed = 99;
    EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
  }
  ModelConfig bad = tiny_config(Variant::kMOTSP);
  bad.heads = 3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = tiny_config(Variant::kMOTSP);
  bad.multi_objective = false;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = tiny_config(Variant::kMOTSP);
  bad.d = 0;
  EXPECT_THROW(NepfModel{bad}, std::invalid_argument);
}

TEST(Model, ReplayLossMatchesTrainingStep) {
  for (Variant v : {Variant::kMOOP, Variant::kRCTSP, Variant::kMOTSP}) {
    SCOPED_TRACE(variant_name(v));
    const Case c = make_case(v, 8, 31);
    NepfModel model(tiny_config(v));
    const Preference pref = is_multi_objective(v) ? Preference::bi(0.35) : Preference({1.0});
    TrainConfig tc;
    tc.k2_train = 4;
    const uint64_t key = 555;
    const StepStats st = hierarchical_step(model, nullptr, {c.g}, c.spec, pref, tc, {key});
    std::vector<std::vector<double>> grads;
    for (size_t i = 0; i < model.params().size(); ++i) {
      const auto gr = model.params()[i].grad();
      grads.emplace_back(gr.begin(), gr.end());
    }
    const auto replay = oracle::sample_replay(model, c.g, c.spec, pref, 0, tc.k2_train, key);
    model.params().zero_grad();
    const nn::Tensor loss = oracle::replay_loss(model, c.g, c.spec, pref, replay);
    EXPECT_NEAR(loss.item(), st.loss, 1e-12);
    loss.backward();
    for (size_t i = 0; i < model.params().size(); ++i) {
      const auto gr = model.params()[i].grad();
      if (grads[i].empty()) continue;
      EXPECT_LT(max_abs_diff(gr, grads[i]), 1e-12) << model.params().name(i);
    }
  }
}

TEST(Model, FullPipelineGradient) {
  for (Variant v : {Variant::kMOOP, Variant::kRCTSP}) {
    SCOPED_TRACE(variant_name(v));
    const Case c = make_case(v, 5, 17);
    NepfModel model(tiny_config(v));
    const Preference pref = is_multi_objective(v) ? Preference::bi(0.5) : Preference({1.0});
    const auto replay = oracle::sample_replay(model, c.g, c.spec, pref, 0, 3, 8);
    std::vector<nn::Tensor> leaves;
    for (size_t i = 0; i < model.params().size(); ++i) leaves.push_back(model.params()[i]);
    oracle::GradWorst at;
    const double err = oracle::gradient_check(
        [&] { return oracle::replay_loss(model, c.g, c.spec, pref, replay); }, leaves, 1e-6, 1e-6, 4, &at);
    EXPECT_LT(err, 1e-4) << model.params().name(at.leaf) << "[" << at.entry << "] analytic " << at.analytic
                         << " numeric " << at.numeric;
  }
}

}  // namespace
}  // namespace mgroute
