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

// Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
// when any selected criterion fails. Criteria 5, 6, 8 and 10 share the
// MOTSP training runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mgroute/baselines.h"
#include "mgroute/fsasp.h"
#include "mgroute/harness.h"
#include "mgroute/oracles.h"
#include "mgroute/pareto.h"
#include "mgroute/replay.h"
#include "mgroute/rng.h"
#include "mgroute/training.h"

namespace fs = std::filesystem;
using namespace mgroute;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

std::string pct(double x) { return num(100.0 * x, 3) + "%"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const Variant kFsaspVariants[] = {Variant::kMOTSP, Variant::kRCTSP, Variant::kMOTSPTW, Variant::kMOOP};

Outcome fsasp_oracle(uint64_t seed) {
  int mismatches = 0, feasible = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto trial = oracle::random_fsasp_trial(kFsaspVariants[t % 4], derive_key(seed, {1, static_cast<uint64_t>(t)}));
    const auto want = oracle::enumerate_fsasp(trial.g, trial.spec, trial.nodes, trial.pref, trial.ideal);
    try {
      const auto got = fsasp_dp(trial.g, trial.spec, trial.nodes, trial.pref, trial.ideal);
      ++feasible;
      if (want.feasible_count == 0 || got.cost != want.cost) ++mismatches;
    } catch (const Infeasible&) {
      if (want.feasible_count != 0) ++mismatches;
    }
  }
  return {mismatches == 0, "1000 sequences (" + std::to_string(feasible) + " feasible), " +
                               std::to_string(mismatches) + " cost mismatches"};
}

Outcome gradients(uint64_t seed) {
  double worst = 0.0;
  size_t entries = 0;
  std::string where;
  for (Variant v : {Variant::kRCTSP, Variant::kMOOP, Variant::kMOTSP}) {
    GenConfig gc;
    gc.variant = v;
    gc.n = 10;
    gc.seed = seed;
    const ProblemSpec spec = calibrate_thresholds(gc, 50);
    gc.n = 5;
    gc.max_edges = 2;
    const MultigraphInstance g = generate(gc);
    NepfModel model(oracle::tiny_config(v, 8, 2));
    const Preference pref = is_multi_objective(v) ? Preference::bi(0.3) : Preference::bi(1.0);
    const auto replay = oracle::sample_replay(model, g, spec, pref, 0, 3, derive_key(seed, {2}));
    std::vector<nn::Tensor> leaves;
    for (size_t i = 0; i < model.params().size(); ++i) leaves.push_back(model.params()[i]);
    for (const auto& t : leaves) entries += t.size();
    oracle::GradWorst w;
    const double err = oracle::gradient_check([&] { return oracle::replay_loss(model, g, spec, pref, replay); },
                                              leaves, 1e-5, 1e-6, 0, &w);
    if (err > worst) {
      worst = err;
      where = std::string(variant_name(v)) + " leaf " + std::to_string(w.leaf);
    }
  }
  return {worst < 1e-4, std::to_string(entries) + " parameter entries over rctsp/moop/motsp, max relative error " +
                            num(worst, 3) + (where.empty() ? "" : " (" + where + ")")};
}

Outcome permutations(uint64_t seed) {
  double shuffle = 0.0, relabel = 0.0;
  for (int t = 0; t < 100; ++t) {
    CounterRng rng(seed, {3, static_cast<uint64_t>(t)});
    const Variant v = kFsaspVariants[t % 4];
    NepfModel model(oracle::tiny_config(v, 8, 2));
    GenConfig gc;
    gc.variant = v;
    gc.n = 4 + static_cast<int>(rng.below(6));
    gc.max_edges = 1 + static_cast<int>(rng.below(4));
    gc.seed = rng.next_u64();
    const MultigraphInstance g = generate(gc);
    ProblemSpec spec;
    spec.variant = v;
    const int n = g.num_nodes();

    auto sets = g.edge_sets();
    for (auto& s : sets) {
      for (size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng.below(i)]);
    }
    const MultigraphInstance shuffled(n, g.attr_dim(), sets, g.node_attrs());
    const auto a = model.pre_encode(g, spec), b = model.pre_encode(shuffled, spec);
    for (size_t i = 0; i < a.size(); ++i) shuffle = std::max(shuffle, std::abs(a.data()[i] - b.data()[i]));

    // Relabel customers only; node attributes move with their node.
    std::vector<int> pi = oracle::random_permutation(n, rng);
    const auto orig = g.edge_sets();
    MultigraphInstance::EdgeSets moved(orig.size());
    for (int u = 0; u < n; ++u) {
      for (int v2 = 0; v2 < n; ++v2) moved[pi[u] * n + pi[v2]] = orig[u * n + v2];
    }
    std::optional<NodeAttrs> attrs = g.node_attrs();
    if (attrs) {
      NodeAttrs m = *attrs;
      for (int u = 0; u < n; ++u) {
        if (!attrs->prize.empty()) m.prize[pi[u]] = attrs->prize[u];
        if (!attrs->demand.empty()) m.demand[pi[u]] = attrs->demand[u];
        if (!attrs->windows.empty()) m.windows[pi[u]] = attrs->windows[u];
      }
      attrs = m;
    }
    const MultigraphInstance relabelled(n, g.attr_dim(), moved, attrs);
    const auto ha = model.encode_instance(g, spec).nodes, hb = model.encode_instance(relabelled, spec).nodes;
    for (int u = 0; u < n; ++u) {
      for (int k = 0; k < ha.cols(); ++k) relabel = std::max(relabel, std::abs(ha.at(u, k) - hb.at(pi[u], k)));
    }
  }
  return {shuffle <= 1e-12 && relabel <= 1e-9,
          "100 trials each: edge shuffle max diff " + num(shuffle, 3) + ", node relabel max diff " + num(relabel, 3)};
}

Outcome gap_study(uint64_t seed) {
  GenConfig gc;
  gc.variant = Variant::kMOTSP;
  gc.n = 50;
  gc.max_edges = 2;
  ProblemSpec spec;
  spec.variant = Variant::kMOTSP;
  spec.hv_reference = default_hv_reference(Variant::kMOTSP, Distribution::kFlex, gc.n);
  std::vector<MultigraphInstance> instances;
  for (uint64_t i = 0; i < 200; ++i) {
    gc.seed = derive_key(seed, {4, i});
    instances.push_back(generate(gc));
  }
  const auto study = fsasp_gap_study(instances, spec, preference_grid(101));
  std::vector<double> gaps;
  int zero = 0;
  double min_gap = kInfinity;
  for (const auto& c : study.cells) {
    gaps.push_back(c.gap);
    min_gap = std::min(min_gap, c.gap);
    if (c.gap == 0.0) ++zero;
  }
  std::sort(gaps.begin(), gaps.end());
  const double p95 = gaps[static_cast<size_t>(std::ceil(0.95 * gaps.size())) - 1];
  const double zero_share = static_cast<double>(zero) / gaps.size();
  return {min_gap >= 0.0 && zero_share >= 0.2 && p95 <= 0.35,
          std::to_string(gaps.size()) + " cells, min gap " + num(min_gap, 3) + ", zero-gap share " + pct(zero_share) +
              ", p95 " + pct(p95) + ", max " + pct(gaps.back())};
}

struct MotspRun {
  TrainResult result;
  fs::path dir;
  double minutes = 0.0;
};

GenConfig motsp_gen(int n) {
  GenConfig gc;
  gc.variant = Variant::kMOTSP;
  gc.n = n;
  gc.max_edges = 2;
  gc.seed = 0;
  return gc;
}

TrainConfig motsp_train_config(uint64_t seed) {
  TrainConfig tc = harness::desk_train_config();
  tc.k1 = 10;
  tc.k2_train = 8;
  tc.seed = seed;
  return tc;
}

MotspRun train_motsp(uint64_t seed, const fs::path& dir) {
  NepfModel model(harness::desk_model_config(Variant::kMOTSP));
  const auto t0 = std::chrono::steady_clock::now();
  MotspRun run;
  run.dir = dir;
  run.result = train(model, motsp_train_config(seed), motsp_gen(10), dir.string());
  run.minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  return run;
}

double greedy_cost(const NepfModel& model, const MultigraphInstance& g, const ProblemSpec& spec) {
  InferenceOptions o;
  o.k2 = 0;
  o.sample_edges = false;
  const Preference pref = Preference::bi(0.5);
  const std::vector<double> ideal{0.0, 0.0};
  return chebyshev_cost(nepf_solve(model, g, spec, pref, o).eval.objectives, pref, ideal);
}

Outcome learning_signal(const MotspRun& run, uint64_t seed) {
  const NepfModel untrained(harness::desk_model_config(Variant::kMOTSP));
  const NepfModel trained = load_model((run.dir / "best.ckpt").string());
  ProblemSpec spec;
  spec.variant = Variant::kMOTSP;
  spec.hv_reference = default_hv_reference(Variant::kMOTSP, Distribution::kFlex, 10);
  const Preference pref = Preference::bi(0.5);
  const std::vector<double> ideal{0.0, 0.0};
  double before = 0.0, after = 0.0;
  int wins = 0;
  GenConfig gc = motsp_gen(10);
  for (uint64_t i = 0; i < 100; ++i) {
    gc.seed = derive_key(seed, {5, i});
    const MultigraphInstance g = generate(gc);
    before += greedy_cost(untrained, g, spec);
    const double mine = greedy_cost(trained, g, spec);
    after += mine;
    const double nn = chebyshev_cost(evaluate_route(g, spec, nearest_neighbor(g, spec, pref)).objectives, pref, ideal);
    if (mine < nn) ++wins;
  }
  before /= 100;
  after /= 100;
  const double improvement = (before - after) / before;
  return {improvement >= 0.10 && wins >= 55,
          "untrained " + num(before) + " -> trained " + num(after) + " (" + pct(improvement) + ", need 10%), beats " +
              "nearest neighbour on " + std::to_string(wins) + "/100 (need 55), training " + num(run.minutes, 3) +
              " min"};
}

Outcome small_gap(const MotspRun& run, uint64_t seed) {
  const NepfModel trained = load_model((run.dir / "best.ckpt").string());
  ProblemSpec spec;
  spec.variant = Variant::kMOTSP;
  spec.hv_reference = default_hv_reference(Variant::kMOTSP, Distribution::kFlex, 8);
  const Preference pref = Preference::bi(0.5);
  const std::vector<double> ideal{0.0, 0.0};
  double gap = 0.0, worst = 0.0;
  GenConfig gc = motsp_gen(8);
  for (uint64_t i = 0; i < 50; ++i) {
    gc.seed = derive_key(seed, {6, i});
    const MultigraphInstance g = generate(gc);
    const double best = oracle::brute_force_tour(g, spec, pref, ideal);
    const double g_i = (greedy_cost(trained, g, spec) - best) / best;
    gap += g_i;
    worst = std::max(worst, g_i);
  }
  gap /= 50;
  return {gap <= 0.25, "mean gap to exhaustive optimum " + pct(gap) + " over 50 instances (max " + pct(worst) + ")"};
}

Outcome hypervolume(uint64_t seed) {
  const std::vector<double> ref{1.0, 1.0};
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    CounterRng rng(seed, {7, static_cast<uint64_t>(t)});
    ParetoArchive archive(2);
    const int k = 1 + static_cast<int>(rng.below(12));
    for (int i = 0; i < k; ++i) {
      const double x = rng.uniform();
      archive.insert(std::vector<double>{x, std::clamp(1.0 - x + rng.uniform(-0.3, 0.3), 0.0, 1.0)});
    }
    auto pts = archive.sorted_objectives();
    const double hv = hypervolume_2d_raw(archive, ref);
    // Points sorted by the first objective have decreasing second objective,
    // so a sample is covered iff the last point with p0 <= x has p1 <= y.
    const int samples = 10'000'000;
    int covered = 0;
    for (int s = 0; s < samples; ++s) {
      const double x = rng.uniform(), y = rng.uniform();
      auto it = std::upper_bound(pts.begin(), pts.end(), x, [](double v, const std::vector<double>& p) { return v < p[0]; });
      if (it != pts.begin() && (*std::prev(it))[1] <= y) ++covered;
    }
    worst = std::max(worst, std::abs(hv - static_cast<double>(covered) / samples));
  }
  int violations = 0;
  for (int t = 0; t < 10'000; ++t) {
    CounterRng rng(seed, {8, static_cast<uint64_t>(t)});
    ParetoArchive archive(2);
    double last = 0.0;
    const int k = 1 + static_cast<int>(rng.below(30));
    for (int i = 0; i < k; ++i) {
      if (archive.insert(std::vector<double>{rng.uniform(), rng.uniform()})) {
        const double hv = hypervolume_2d_raw(archive, ref);
        if (hv < last) ++violations;
        last = hv;
      }
    }
  }
  return {worst <= 1e-3 && violations == 0, "max |HV - Monte Carlo| " + num(worst, 3) +
                                                " on 100 archives (1e7 samples), " + std::to_string(violations) +
                                                " monotonicity violations in 1e4 trials"};
}

Outcome identities(const MotspRun& run) {
  const TrainConfig tc = motsp_train_config(0);
  bool ok = true;
  double max_sum = 0.0;
  int64_t checks = 0, equal_batches = 0;
  for (const auto& rec : run.result.log) {
    if (rec.epoch == 0) continue;
    ok = ok && rec.identity_checks == tc.instances_per_epoch;
    max_sum = std::max(max_sum, rec.max_node_sum);
    checks += rec.identity_checks;
    equal_batches += rec.zero_edge_batches;
  }
  // A violated identity aborts the step, so finishing training is itself
  // the per-step assertion; the log confirms every instance was checked.
  ok = ok && run.result.log.size() == static_cast<size_t>(tc.epochs) + 1;
  return {ok && max_sum <= 1e-12,
          std::to_string(checks) + " instance-steps checked, largest |sum of node advantages| " + num(max_sum, 3) + ", " +
              std::to_string(equal_batches) + " equal-reward edge batches with exactly zero advantage"};
}

Outcome feasibility(uint64_t seed, const fs::path& dir) {
  int bad_op = 0, bad_moop = 0;
  for (Variant v : {Variant::kOP, Variant::kMOOP}) {
    GenConfig gc;
    gc.variant = v;
    gc.n = 20;
    gc.seed = seed;
    const ProblemSpec spec = calibrate_thresholds(gc, 200);
    for (uint64_t i = 0; i < 1000; ++i) {
      gc.seed = derive_key(seed, {9, static_cast<uint64_t>(v), i});
      gc.max_edges = 1 + static_cast<int>(i % 5);
      const MultigraphInstance g = generate(gc);
      if (v == Variant::kOP) {
        bad_op += evaluate_route(g, spec, greedy_op(g, spec)).violation != 0.0;
      } else {
        const double l = static_cast<double>(i % 11) / 10.0;
        bad_moop += evaluate_route(g, spec, greedy_moop(g, spec, Preference::bi(l))).violation != 0.0;
      }
    }
  }

  // RCTSP smoke training with the default penalty.
  GenConfig gc;
  gc.variant = Variant::kRCTSP;
  gc.n = 10;
  gc.max_edges = 2;
  gc.seed = 0;
  TrainConfig tc = harness::desk_train_config();
  tc.seed = seed;
  NepfModel model(harness::desk_model_config(Variant::kRCTSP));
  const auto result = train(model, tc, gc, dir.string());
  const auto validation = validation_instances(tc, gc);
  const ValidationStats& final_stats = result.log.back().validation;
  // How many validation instances admit a feasible tour at all.
  int solvable = 0;
  for (const auto& g : validation) {
    const std::vector<double> w{0.0, 1.0};
    const auto c = cheapest_edge_matrix(g, w);
    const int n = g.num_nodes();
    std::vector<double> dp((size_t{1} << n) * n, kInfinity);
    dp[size_t{1} * n] = 0.0;
    for (size_t m = 1; m < dp.size() / n; m += 2) {
      for (int u = 0; u < n; ++u) {
        const double base = dp[m * n + u];
        if (!std::isfinite(base)) continue;
        for (int v = 1; v < n; ++v) {
          if (m >> v & 1) continue;
          double& cell = dp[(m | size_t{1} << v) * n + v];
          cell = std::min(cell, base + c[u * n + v]);
        }
      }
    }
    double least = kInfinity;
    for (int u = 1; u < n; ++u) least = std::min(least, dp[(dp.size() / n - 1) * n + u] + c[u * n]);
    if (least <= result.spec.resource_limit) ++solvable;
  }
  const bool ok = bad_op == 0 && bad_moop == 0 && final_stats.feasible_rate >= 0.99;
  return {ok, "greedy_op violations " + std::to_string(bad_op) + "/1000, greedy_moop violations " +
                  std::to_string(bad_moop) + "/1000; RCTSP N=10 final greedy rollouts feasible " +
                  pct(final_stats.feasible_rate) + " (need 99%), best-of-starts " +
                  pct(final_stats.best_feasible_rate) + "; " + std::to_string(solvable) + "/" +
                  std::to_string(validation.size()) + " validation instances admit any feasible tour (R " +
                  num(result.spec.resource_limit) + ")"};
}

Outcome determinism(const MotspRun& a, const MotspRun& b) {
  const std::string la = slurp(a.dir / "metrics.jsonl"), lb = slurp(b.dir / "metrics.jsonl");
  return {!la.empty() && la == lb, "metrics.jsonl " + std::to_string(la.size()) + " vs " + std::to_string(lb.size()) +
                                       " bytes, " + (la == lb ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-10"};
  std::string out = (fs::temp_directory_path() / "mgroute_acceptance").string();
  std::vector<int> only;
  uint64_t seed = 20260418;
  app.add_option("--out", out, "Scratch directory for training runs")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 10));
  app.add_option("--seed", seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
  fs::create_directories(out);
  bool all = true;
  auto report = [&](int c, const std::function<Outcome()>& fn) {
    if (!wanted(c)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c << ": " << o.detail << " [" << num(s, 3) << " s]"
              << std::endl;
  };

  report(1, [&] { return fsasp_oracle(seed); });
  report(2, [&] { return gradients(seed); });
  report(3, [&] { return permutations(seed); });
  report(4, [&] { return gap_study(seed); });

  const bool need_training = wanted(5) || wanted(6) || wanted(8) || wanted(10);
  MotspRun run_a, run_b;
  if (need_training) run_a = train_motsp(7, fs::path(out) / "motsp_a");
  report(5, [&] { return learning_signal(run_a, seed); });
  report(6, [&] { return small_gap(run_a, seed); });
  report(7, [&] { return hypervolume(seed); });
  report(8, [&] { return identities(run_a); });
  report(9, [&] { return feasibility(seed, fs::path(out) / "rctsp"); });
  report(10, [&] {
    run_b = train_motsp(7, fs::path(out) / "motsp_b");
    return determinism(run_a, run_b);
  });
  return all ? 0 : 1;
}
