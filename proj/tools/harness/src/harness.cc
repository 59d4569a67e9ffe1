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

#include "mgroute/harness.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mgroute/baselines.h"
#include "mgroute/rng.h"

namespace mgroute::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_from(const json& j, double missing) {
  if (j.is_null()) return missing;
  if (!j.is_number()) throw SchemaError("expected a number or null");
  return j.get<double>();
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const char* column) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw SchemaError(std::string("column ") + column + ": not a number: '" + s + "'");
  }
}

const char* const kMetricHeader = "instance_id,variant,distribution,method,hv,best_obj,feasible_rate,wall_ms";

}  // namespace

void write_atomically(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string instance_to_json(const MultigraphInstance& instance, const ProblemSpec& spec) {
  json j;
  const int n = instance.num_nodes();
  j["n"] = n;
  j["attr_dim"] = instance.attr_dim();
  json edges = json::array();
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      for (int l = 0; l < instance.num_edges(u, v); ++l) {
        const auto e = instance.edge(u, v, l);
        edges.push_back(json::array({u, v, std::vector<double>(e.begin(), e.end())}));
      }
    }
  }
  j["edges"] = std::move(edges);
  json attrs = json::object();
  if (const auto& a = instance.node_attrs()) {
    if (!a->prize.empty()) attrs["prize"] = a->prize;
    if (!a->demand.empty()) attrs["demand"] = a->demand;
    if (!a->windows.empty()) {
      json w = json::array();
      for (const auto& tw : a->windows) w.push_back(json::array({number_or_null(tw.open), number_or_null(tw.close)}));
      attrs["windows"] = std::move(w);
    }
  }
  j["node_attrs"] = std::move(attrs);
  json s;
  s["variant"] = variant_name(spec.variant);
  s["capacity"] = spec.capacity;
  s["resource_limit"] = spec.resource_limit;
  s["threshold1"] = spec.threshold1;
  s["threshold2"] = spec.threshold2;
  s["hv_reference"] = spec.hv_reference;
  j["spec"] = std::move(s);
  return j.dump() + "\n";
}

LoadedInstance instance_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("instance is not valid JSON: ") + e.what());
  }
  try {
    const int n = j.at("n").get<int>();
    const int attr_dim = j.at("attr_dim").get<int>();
    if (n < 2 || attr_dim < 1) throw SchemaError("n must be >= 2 and attr_dim >= 1");
    MultigraphInstance::EdgeSets sets(static_cast<size_t>(n) * n);
    for (const auto& e : j.at("edges")) {
      const int u = e.at(0).get<int>(), v = e.at(1).get<int>();
      if (u < 0 || v < 0 || u >= n || v >= n) throw SchemaError("edge end point out of range");
      sets[static_cast<size_t>(u) * n + v].push_back(e.at(2).get<std::vector<double>>());
    }
    std::optional<NodeAttrs> attrs;
    if (j.contains("node_attrs") && !j["node_attrs"].empty()) {
      const json& a = j["node_attrs"];
      NodeAttrs na;
      if (a.contains("prize")) na.prize = a["prize"].get<std::vector<double>>();
      if (a.contains("demand")) na.demand = a["demand"].get<std::vector<double>>();
      if (a.contains("windows")) {
        for (const auto& w : a["windows"]) na.windows.push_back({number_from(w.at(0), 0.0), number_from(w.at(1), kInfinity)});
      }
      attrs = std::move(na);
    }
    const json& s = j.at("spec");
    ProblemSpec spec;
    spec.variant = parse_variant(s.at("variant").get<std::string>());
    spec.capacity = s.value("capacity", 0.0);
    spec.resource_limit = s.value("resource_limit", 0.0);
    spec.threshold1 = s.value("threshold1", 0.0);
    spec.threshold2 = s.value("threshold2", 0.0);
    if (s.contains("hv_reference")) spec.hv_reference = s["hv_reference"].get<std::vector<double>>();
    return {MultigraphInstance(n, attr_dim, sets, std::move(attrs)), spec};
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed instance: ") + e.what());
  }
}

std::string route_to_json(const Route& route) {
  return json{{"pi", route.nodes}, {"eps", route.edges}}.dump();
}

Route route_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    return Route{j.at("pi").get<std::vector<int>>(), j.at("eps").get<std::vector<int>>()};
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed route: ") + e.what());
  }
}

void generate_dataset(const GenConfig& base, int count, int calibration_samples, const std::string& out_dir) {
  if (count <= 0) throw UsageError("--count must be positive");
  base.validate();
  const ProblemSpec spec = calibrate_thresholds(base, calibration_samples);
  json seeds = json::array();
  for (int i = 0; i < count; ++i) {
    GenConfig g = base;
    g.seed = derive_key(base.seed, {static_cast<uint64_t>(i)});
    seeds.push_back(g.seed);
    char name[32];
    std::snprintf(name, sizeof name, "instance_%05d.json", i);
    write_atomically((fs::path(out_dir) / name).string(), instance_to_json(generate(g), spec));
  }
  json m;
  m["variant"] = variant_name(base.variant);
  m["distribution"] = base.distribution_tag();
  m["n"] = base.n;
  m["seed"] = base.seed;
  m["count"] = count;
  m["calibration_samples"] = calibration_samples;
  m["instance_seeds"] = std::move(seeds);
  m["spec"] = json::parse(instance_to_json(generate(base), spec)).at("spec");
  write_atomically((fs::path(out_dir) / "manifest.json").string(), m.dump(2) + "\n");
}

std::vector<LoadedInstance> load_dataset(const std::string& dir, std::string* distribution) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("instance_", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no instance_*.json files in " + dir);
  std::vector<LoadedInstance> out;
  for (const auto& f : files) out.push_back(instance_from_json(read_file(f)));
  if (distribution) {
    distribution->clear();
    const fs::path manifest = fs::path(dir) / "manifest.json";
    if (fs::exists(manifest)) {
      const json m = json::parse(read_file(manifest.string()), nullptr, false);
      if (m.is_object() && m.contains("distribution")) *distribution = m["distribution"].get<std::string>();
    }
  }
  return out;
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = next++; i < count && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<Preference> solve_preferences(Variant variant, int prefs) {
  if (prefs < 1) throw UsageError("--prefs must be >= 1");
  if (!is_multi_objective(variant)) return {Preference::bi(1.0)};
  if (prefs == 1) return {Preference::bi(0.5)};
  return preference_grid(prefs);
}

std::vector<SolveRecord> solve_dataset(const std::vector<LoadedInstance>& data, const SolveOptions& options,
                                       const NepfModel* model) {
  const std::string& m = options.method;
  auto require = [&](bool ok, const char* what) {
    if (!ok) throw UsageError("method " + m + " " + what);
  };
  if (data.empty()) return {};
  const Variant v = data.front().spec.variant;
  for (const auto& d : data) {
    if (d.spec.variant != v) throw UsageError("instances of one run must share a variant");
  }
  if (m == "beam") require(v == Variant::kRCTSP, "needs rctsp instances");
  else if (m == "greedy-op") require(v == Variant::kOP, "needs op instances");
  else if (m == "insertion") require(v == Variant::kMOTSPTW, "needs motsptw instances");
  else if (m == "greedy-moop") require(v == Variant::kMOOP, "needs moop instances");
  else if (m == "nn") require(v == Variant::kMOTSP || v == Variant::kMOCVRP, "needs motsp or mocvrp instances");
  else if (m == "nepf") {
    require(model != nullptr, "needs --ckpt");
    require(model->config().variant == v, "checkpoint variant differs from the instances");
  } else {
    throw UsageError("unknown method '" + m + "'");
  }

  const std::vector<Preference> prefs = solve_preferences(v, options.prefs);
  const size_t np = prefs.size();
  std::vector<SolveRecord> out(data.size() * np);
  parallel_for(static_cast<int>(data.size()), options.workers, [&](int i) {
    const auto& g = data[i].instance;
    const auto& spec = data[i].spec;
    for (size_t p = 0; p < np; ++p) {
      const Preference& pref = prefs[p];
      const auto t0 = std::chrono::steady_clock::now();
      Route r;
      if (m == "nn") {
        r = nearest_neighbor(g, spec, pref);
      } else if (m == "beam") {
        BeamOptions bo;
        bo.beam_width = options.beam_width;
        r = beam_search_rctsp(g, spec, bo).route;
      } else if (m == "greedy-op") {
        r = greedy_op(g, spec);
      } else if (m == "insertion") {
        r = insertion_motsptw(g, spec, pref);
      } else if (m == "greedy-moop") {
        r = greedy_moop(g, spec, pref);
      } else {
        InferenceOptions io = options.nepf;
        io.seed = derive_key(options.nepf.seed, {static_cast<uint64_t>(i), p});
        r = nepf_solve(*model, g, spec, pref, io, options.penalty).route;
      }
      const auto t1 = std::chrono::steady_clock::now();
      SolveRecord& rec = out[i * np + p];
      rec.instance = i;
      rec.lambda.assign(pref.weights().begin(), pref.weights().end());
      rec.eval = evaluate_route(g, spec, r);
      rec.route = std::move(r);
      rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
  });
  return out;
}

std::string solve_records_json(const std::string& method, const std::vector<SolveRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) {
    json o;
    o["instance"] = r.instance;
    o["lambda"] = r.lambda;
    o["route"] = {{"pi", r.route.nodes}, {"eps", r.route.edges}};
    o["objectives"] = r.eval.objectives;
    o["violation"] = r.eval.violation;
    o["feasible"] = r.eval.feasible;
    arr.push_back(std::move(o));
  }
  return json{{"method", method}, {"results", std::move(arr)}}.dump(1) + "\n";
}

std::vector<MetricRow> metric_rows(const std::vector<LoadedInstance>& data, const std::vector<SolveRecord>& records,
                                   const std::string& method, const std::string& distribution) {
  std::vector<MetricRow> rows(data.size());
  std::vector<int> count(data.size(), 0), feasible(data.size(), 0);
  std::vector<double> obj(data.size(), 0.0);
  std::vector<ParetoArchive> archives;
  for (size_t i = 0; i < data.size(); ++i) archives.emplace_back(data[i].spec.objective_dim());
  for (const auto& r : records) {
    if (r.instance < 0 || static_cast<size_t>(r.instance) >= data.size()) throw SchemaError("record instance out of range");
    const size_t i = static_cast<size_t>(r.instance);
    const ProblemSpec& spec = data[i].spec;
    ++count[i];
    if (r.eval.feasible) ++feasible[i];
    rows[i].wall_ms += r.wall_ms;
    if (is_multi_objective(spec.variant)) {
      const std::vector<double> ideal(r.eval.objectives.size(), 0.0);
      obj[i] += chebyshev_cost(r.eval.objectives, Preference(r.lambda), ideal);
      if (r.eval.feasible && !spec.hv_reference.empty() && weakly_dominates(r.eval.objectives, spec.hv_reference)) {
        archives[i].insert(r.eval.objectives);
      }
    } else {
      obj[i] += r.eval.objectives[0];
    }
  }
  for (size_t i = 0; i < data.size(); ++i) {
    MetricRow& row = rows[i];
    row.instance_id = std::to_string(i);
    row.variant = std::string(variant_name(data[i].spec.variant));
    row.distribution = distribution;
    row.method = method;
    if (count[i] == 0) throw SchemaError("instance " + row.instance_id + " has no records");
    row.best_obj = obj[i] / count[i];
    row.feasible_rate = static_cast<double>(feasible[i]) / count[i];
    if (is_multi_objective(data[i].spec.variant) && !data[i].spec.hv_reference.empty()) {
      row.hv = archives[i].empty() ? 0.0 : hypervolume_2d(archives[i], data[i].spec.hv_reference);
    }
  }
  return rows;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = std::string(kMetricHeader) + "\n";
  for (const auto& r : rows) {
    out += r.instance_id + "," + r.variant + "," + r.distribution + "," + r.method + "," +
           (r.hv ? format_double(*r.hv) : "") + "," + format_double(r.best_obj) + "," +
           format_double(r.feasible_rate) + "," + format_double(r.wall_ms) + "\n";
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty metrics file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricHeader) throw SchemaError("unexpected metrics header: " + line);
  std::vector<MetricRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw SchemaError("line " + std::to_string(lineno) + ": expected 8 columns");
    MetricRow r;
    r.instance_id = f[0];
    r.variant = f[1];
    r.distribution = f[2];
    r.method = f[3];
    if (r.variant.empty() || r.method.empty()) throw SchemaError("line " + std::to_string(lineno) + ": empty key");
    if (!f[4].empty()) r.hv = parse_number(f[4], "hv");
    r.best_obj = parse_number(f[5], "best_obj");
    r.feasible_rate = parse_number(f[6], "feasible_rate");
    r.wall_ms = parse_number(f[7], "wall_ms");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryRow> aggregate_metrics(const std::vector<MetricRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, SummaryRow> groups;
  std::map<Key, int> hv_count;
  for (const auto& r : rows) {
    const Key k{r.variant, r.distribution, r.method};
    SummaryRow& s = groups[k];
    s.variant = r.variant;
    s.distribution = r.distribution;
    s.method = r.method;
    ++s.instances;
    s.mean_obj += r.best_obj;
    s.feasible_rate += r.feasible_rate;
    s.total_ms += r.wall_ms;
    if (r.hv) {
      s.mean_hv = s.mean_hv.value_or(0.0) + *r.hv;
      ++hv_count[k];
    }
  }
  for (auto& [k, s] : groups) {
    s.mean_obj /= s.instances;
    s.feasible_rate /= s.instances;
    if (s.mean_hv && hv_count[k] == s.instances) {
      *s.mean_hv /= s.instances;
    } else if (s.mean_hv) {
      throw SchemaError("method " + s.method + " mixes rows with and without hv");
    }
  }
  // Gaps within each (variant, distribution).
  std::map<std::pair<std::string, std::string>, std::vector<SummaryRow*>> problems;
  for (auto& [k, s] : groups) problems[{s.variant, s.distribution}].push_back(&s);
  for (auto& [p, members] : problems) {
    const bool by_hv = std::all_of(members.begin(), members.end(), [](const SummaryRow* s) { return s->mean_hv.has_value(); });
    double best = by_hv ? -kInfinity : kInfinity;
    for (const SummaryRow* s : members) best = by_hv ? std::max(best, *s->mean_hv) : std::min(best, s->mean_obj);
    for (SummaryRow* s : members) {
      const double v = by_hv ? *s->mean_hv : s->mean_obj;
      const double diff = by_hv ? best - v : v - best;
      s->gap = diff == 0.0 ? 0.0 : (best != 0.0 ? diff / std::abs(best) : kInfinity);
    }
  }
  std::vector<SummaryRow> out;
  for (auto& [k, s] : groups) out.push_back(std::move(s));
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "variant,distribution,method,instances,mean_hv,mean_obj,gap,feasible_rate,total_ms\n";
  for (const auto& r : rows) {
    out += r.variant + "," + r.distribution + "," + r.method + "," + std::to_string(r.instances) + "," +
           (r.mean_hv ? format_double(*r.mean_hv) : "") + "," + format_double(r.mean_obj) + "," +
           format_double(r.gap) + "," + format_double(r.feasible_rate) + "," + format_double(r.total_ms) + "\n";
  }
  return out;
}

std::string gap_csv(const GapStudyResult& result) {
  std::string out = "instance,lambda1,greedy_cost,dp_cost,gap\n";
  for (const auto& c : result.cells) {
    out += std::to_string(c.instance) + "," + format_double(c.lambda1) + "," + format_double(c.greedy_cost) + "," +
           format_double(c.dp_cost) + "," + format_double(c.gap) + "\n";
  }
  return out;
}

ModelConfig desk_model_config(Variant variant) {
  ModelConfig c = ModelConfig::for_variant(variant);
  c.d = 32;
  c.d_edge = 32;
  c.great_layers = 2;
  c.transformer_layers = 1;
  c.heads = 4;
  c.ffn_hidden = 64;
  return c;
}

TrainConfig desk_train_config() {
  TrainConfig t;
  t.batch_size = 32;
  t.k2_train = 8;
  t.epochs = 30;
  t.instances_per_epoch = 2000;
  t.lr = 1e-3;
  return t;
}

std::string run_manifest(const std::vector<std::string>& argv, const std::string& extra_json) {
  json m;
  m["tool"] = "mgroute";
  m["argv"] = argv;
  json extra = json::parse(extra_json);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  return m.dump(2) + "\n";
}

}  // namespace mgroute::harness
