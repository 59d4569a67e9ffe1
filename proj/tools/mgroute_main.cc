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

// mgroute: generate instances, run solvers, train and evaluate the policy,
// reproduce the edge-selection gap study, aggregate metric tables.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mgroute/harness.h"
#include "mgroute/rng.h"

namespace {

namespace fs = std::filesystem;
namespace h = mgroute::harness;
using nlohmann::json;

mgroute::GenConfig gen_config(const std::string& variant, const std::string& dist, int n, uint64_t seed) {
  mgroute::GenConfig g;
  try {
    g.variant = mgroute::parse_variant(variant);
    mgroute::parse_distribution(dist, g);
  } catch (const std::exception& e) {
    throw h::UsageError(e.what());
  }
  g.n = n;
  g.seed = seed;
  return g;
}

std::string sibling_manifest(const std::string& out) { return out + ".manifest.json"; }

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Multigraph routing: instances, baselines and the node-edge policy"};
  app.require_subcommand(1);

  // gen
  std::string variant = "motsp", dist = "flex2", out, in, ckpt;
  int n = 20, count = 10, calibration = 500, workers = 1;
  uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen", "Generate instances and a manifest with the calibrated spec");
  gen->add_option("--variant", variant, "motsp|mocvrp|motsptw|rctsp|op|moop")->capture_default_str();
  gen->add_option("--dist", dist, "flexX, fixX or real-sc|wc|nc")->capture_default_str();
  gen->add_option("--n", n, "Nodes including the depot")->capture_default_str();
  gen->add_option("--count", count)->capture_default_str();
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--calibration-samples", calibration)->capture_default_str();
  gen->add_option("--out", out, "Output directory")->required();

  // solve
  h::SolveOptions solve_opts;
  std::string metrics_out;
  auto* solve = app.add_subcommand("solve", "Run a baseline or a checkpoint on a directory of instances");
  solve->add_option("--method", solve_opts.method, "nn|beam|greedy-op|insertion|greedy-moop|nepf")->required();
  solve->add_option("--in", in, "Instance directory")->required();
  solve->add_option("--out", out, "routes.json")->required();
  solve->add_option("--metrics", metrics_out, "Optional per-instance metrics CSV");
  solve->add_option("--prefs", solve_opts.prefs, "Bi-objective preferences: 1 = (0.5,0.5), else a grid")->capture_default_str();
  solve->add_option("--beam-width", solve_opts.beam_width)->capture_default_str();
  solve->add_option("--ckpt", ckpt, "Checkpoint for --method nepf");
  solve->add_option("--aug", solve_opts.nepf.aug, "Augmentations 1..8")->capture_default_str();
  solve->add_option("--k2", solve_opts.nepf.k2, "Sampled edge selections per route")->capture_default_str();
  solve->add_option("--workers", solve_opts.workers)->capture_default_str();
  solve->add_option("--seed", solve_opts.nepf.seed)->capture_default_str();

  // train
  mgroute::TrainConfig tc = h::desk_train_config();
  int d = -1, d_edge = -1, great = -1, tf = -1, heads = -1, ffn = -1, hyper = -1;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train the policy; writes checkpoints, metrics.jsonl and manifest.json");
  train->add_option("--variant", variant)->capture_default_str();
  train->add_option("--dist", dist)->capture_default_str();
  train->add_option("--n", n)->capture_default_str();
  train->add_option("--epochs", tc.epochs)->capture_default_str();
  train->add_option("--instances", tc.instances_per_epoch, "Instances per epoch")->capture_default_str();
  train->add_option("--batch", tc.batch_size)->capture_default_str();
  train->add_option("--k1", tc.k1, "POMO starts, 0 = all")->capture_default_str();
  train->add_option("--k2", tc.k2_train)->capture_default_str();
  train->add_option("--k2-eval", tc.k2_eval)->capture_default_str();
  train->add_option("--lr", tc.lr)->capture_default_str();
  train->add_option("--weight-decay", tc.weight_decay)->capture_default_str();
  train->add_option("--penalty", tc.penalty)->capture_default_str();
  train->add_option("--grad-clip", tc.grad_clip)->capture_default_str();
  train->add_option("--validation", tc.validation_size)->capture_default_str();
  train->add_option("--calibration-samples", tc.calibration_samples)->capture_default_str();
  train->add_option("--seed", tc.seed)->capture_default_str();
  train->add_option("--d", d, "Node embedding size");
  train->add_option("--d-edge", d_edge, "Edge-stage embedding size");
  train->add_option("--great-layers", great);
  train->add_option("--tf-layers", tf);
  train->add_option("--heads", heads);
  train->add_option("--ffn", ffn);
  train->add_option("--hyper-hidden", hyper);
  train->add_flag("--quiet", quiet, "No progress records on stdout");
  train->add_option("--out", out, "Output directory")->required();

  // eval
  h::SolveOptions eval_opts;
  eval_opts.method = "nepf";
  eval_opts.prefs = 101;
  eval_opts.nepf.aug = 8;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and write per-instance metrics");
  eval->add_option("--ckpt", ckpt)->required();
  eval->add_option("--in", in)->required();
  eval->add_option("--prefs", eval_opts.prefs)->capture_default_str();
  eval->add_option("--aug", eval_opts.nepf.aug)->capture_default_str();
  eval->add_option("--k2", eval_opts.nepf.k2)->capture_default_str();
  eval->add_option("--workers", eval_opts.workers)->capture_default_str();
  eval->add_option("--seed", eval_opts.nepf.seed)->capture_default_str();
  eval->add_option("--out", out, "metrics.csv")->required();

  // compare-fsasp
  int instances = 200, prefs = 101;
  auto* cmp = app.add_subcommand("compare-fsasp", "Greedy-linear vs Chebyshev-optimal edge selection on nearest-neighbour tours");
  cmp->add_option("--dist", dist)->capture_default_str();
  cmp->add_option("--n", n)->capture_default_str();
  cmp->add_option("--instances", instances)->capture_default_str();
  cmp->add_option("--prefs", prefs)->capture_default_str();
  cmp->add_option("--seed", seed)->capture_default_str();
  cmp->add_option("--workers", workers)->capture_default_str();
  cmp->add_option("--out", out, "gaps.csv")->required();

  // selftest
  int scale = 1;
  auto* self = app.add_subcommand("selftest", "Oracle, gradient and invariant checks");
  self->add_option("--seed", seed)->capture_default_str();
  self->add_option("--scale", scale, "Multiplies trial counts")->capture_default_str();

  // aggregate
  std::vector<std::string> files;
  auto* agg = app.add_subcommand("aggregate", "Summarise metric CSV files per variant, distribution and method");
  agg->add_option("files", files)->required();
  agg->add_option("--out", out, "summary.csv; stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      if (n < 2) throw h::UsageError("--n must be >= 2");
      h::generate_dataset(gen_config(variant, dist, n, seed), count, calibration, out);
      std::cout << "wrote " << count << " instances to " << out << "\n";
    } else if (solve->parsed() || eval->parsed()) {
      h::SolveOptions& opts = solve->parsed() ? solve_opts : eval_opts;
      std::string distribution;
      const auto data = h::load_dataset(in, &distribution);
      std::optional<mgroute::NepfModel> model;
      if (!ckpt.empty()) {
        if (!fs::exists(ckpt)) throw h::UsageError("checkpoint not found: " + ckpt);
        model.emplace(mgroute::load_model(ckpt));
      }
      if (opts.nepf.aug < 1 || opts.nepf.aug > 8) throw h::UsageError("--aug must be in 1..8");
      const auto records = h::solve_dataset(data, opts, model ? &*model : nullptr);
      const auto rows = h::metric_rows(data, records, opts.method, distribution);
      if (solve->parsed()) {
        h::write_atomically(out, h::solve_records_json(opts.method, records));
        if (!metrics_out.empty()) h::write_atomically(metrics_out, h::metrics_csv(rows));
      } else {
        h::write_atomically(out, h::metrics_csv(rows));
      }
      h::write_atomically(sibling_manifest(out), h::run_manifest(args));
      std::cout << "solved " << data.size() << " instances, " << records.size() << " routes\n";
    } else if (train->parsed()) {
      const mgroute::GenConfig g = gen_config(variant, dist, n, tc.seed);
      mgroute::ModelConfig mc = h::desk_model_config(g.variant);
      if (d > 0) mc.d = d;
      if (d_edge > 0) mc.d_edge = d_edge;
      if (great > 0) mc.great_layers = great;
      if (tf >= 0) mc.transformer_layers = tf;
      if (heads > 0) mc.heads = heads;
      if (ffn > 0) mc.ffn_hidden = ffn;
      if (hyper > 0) mc.hyper_hidden = hyper;
      mc.init_seed = tc.seed;
      try {
        mc.validate();
        tc.validate(mc.edge_stage == mgroute::EdgeStage::kLearned);
      } catch (const std::invalid_argument& e) {
        throw h::UsageError(e.what());
      }
      mgroute::NepfModel model(mc);
      const auto result = mgroute::train(model, tc, g, out, quiet ? nullptr : &std::cout);
      h::write_atomically((fs::path(out) / "run.json").string(),
                          h::run_manifest(args, json{{"best_epoch", result.best_epoch}}.dump()));
    } else if (cmp->parsed()) {
      mgroute::GenConfig g = gen_config("motsp", dist, n, seed);
      if (instances <= 0) throw h::UsageError("--instances must be positive");
      std::vector<mgroute::MultigraphInstance> data(instances, mgroute::generate(g));
      h::parallel_for(instances, workers, [&](int i) {
        mgroute::GenConfig gi = g;
        gi.seed = mgroute::derive_key(seed, {static_cast<uint64_t>(i)});
        data[i] = mgroute::generate(gi);
      });
      mgroute::ProblemSpec spec;
      spec.variant = mgroute::Variant::kMOTSP;
      spec.hv_reference = mgroute::default_hv_reference(g.variant, g.distribution, n);
      const auto result = mgroute::fsasp_gap_study(data, spec, mgroute::preference_grid(prefs));
      h::write_atomically(out, h::gap_csv(result));
      h::write_atomically(sibling_manifest(out), h::run_manifest(args));
      std::cout << "wrote " << result.cells.size() << " rows to " << out << "\n";
    } else if (self->parsed()) {
      bool ok = true;
      for (const auto& c : h::run_selftest(seed, scale)) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        ok = ok && c.pass;
      }
      return ok ? 0 : 1;
    } else if (agg->parsed()) {
      std::vector<h::MetricRow> rows;
      for (const auto& f : files) {
        auto part = h::parse_metrics_csv(h::read_file(f));
        rows.insert(rows.end(), part.begin(), part.end());
      }
      const std::string table = h::summary_csv(h::aggregate_metrics(rows));
      if (out.empty()) {
        std::cout << table;
      } else {
        h::write_atomically(out, table);
        h::write_atomically(sibling_manifest(out), h::run_manifest(args));
      }
    }
  } catch (const h::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
