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

#include "mgroute/model.h"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "mgroute/fsasp.h"
#include "mgroute/rng.h"

namespace mgroute {

using nn::Tensor;

namespace {

const char* edge_stage_name(EdgeStage s) { return s == EdgeStage::kLearned ? "learned" : "greedy"; }

std::vector<char> diag_mask(int n) {
  std::vector<char> m(static_cast<size_t>(n) * n, 1);
  for (int u = 0; u < n; ++u) m[static_cast<size_t>(u) * n + u] = 0;
  return m;
}

int argmax_allowed(std::span<const double> row, std::span<const char> mask) {
  int best = -1;
  for (size_t i = 0; i < row.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (best < 0 || row[i] > row[best]) best = static_cast<int>(i);
  }
  return best;
}

// Inverse-CDF draw from log-probabilities restricted to the mask.
int sample_allowed(std::span<const double> logp, std::span<const char> mask, double u) {
  double acc = 0.0;
  int last = -1;
  for (size_t i = 0; i < logp.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    last = static_cast<int>(i);
    acc += std::exp(logp[i]);
    if (u < acc) return last;
  }
  return last;
}

}  // namespace

ModelConfig ModelConfig::for_variant(Variant variant) {
  ModelConfig c;
  c.variant = variant;
  c.multi_objective = is_multi_objective(variant);
  c.edge_stage = (variant == Variant::kMOTSP || variant == Variant::kMOCVRP) ? EdgeStage::kGreedy
                                                                            : EdgeStage::kLearned;
  c.state_estimator =
      variant == Variant::kRCTSP || variant == Variant::kOP || variant == Variant::kMOOP;
  return c;
}

void ModelConfig::validate() const {
  if (d <= 0 || d_edge <= 0 || great_layers <= 0 || transformer_layers < 0 || heads <= 0 ||
      ffn_hidden <= 0 || hyper_hidden <= 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (d % heads != 0) throw std::invalid_argument("d must be divisible by heads");
  if (d % 2 != 0 || d_edge % 2 != 0) throw std::invalid_argument("d and d' must be even");
  if (multi_objective != is_multi_objective(variant)) {
    throw std::invalid_argument("multi_objective flag does not match the variant");
  }
}

int ModelConfig::feature_dim() const {
  switch (variant) {
    case Variant::kOP:
    case Variant::kMOOP:
    case Variant::kMOCVRP: return 3;
    case Variant::kMOTSPTW: return 4;
    default: return 2;
  }
}

int ModelConfig::state_dim() const {
  if (variant == Variant::kMOCVRP) return 1;
  if (state_estimator) return mgroute::state_dim(variant);
  return 0;
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["variant"] = variant_name(variant);
  j["d"] = d;
  j["d_edge"] = d_edge;
  j["great_layers"] = great_layers;
  j["transformer_layers"] = transformer_layers;
  j["heads"] = heads;
  j["ffn_hidden"] = ffn_hidden;
  j["hyper_hidden"] = hyper_hidden;
  j["clip_node"] = clip_node;
  j["clip_edge"] = clip_edge;
  j["multi_objective"] = multi_objective;
  j["edge_stage"] = edge_stage_name(edge_stage);
  j["state_estimator"] = state_estimator;
  j["init_seed"] = init_seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c = for_variant(parse_variant(j.at("variant").get<std::string>()));
  c.d = j.at("d");
  c.d_edge = j.at("d_edge");
  c.great_layers = j.at("great_layers");
  c.transformer_layers = j.at("transformer_layers");
  c.heads = j.at("heads");
  c.ffn_hidden = j.at("ffn_hidden");
  c.hyper_hidden = j.at("hyper_hidden");
  c.clip_node = j.at("clip_node");
  c.clip_edge = j.at("clip_edge");
  c.multi_objective = j.at("multi_objective");
  c.edge_stage = j.at("edge_stage") == "learned" ? EdgeStage::kLearned : EdgeStage::kGreedy;
  c.state_estimator = j.at("state_estimator");
  c.init_seed = j.at("init_seed");
  c.validate();
  return c;
}

std::vector<double> edge_features(const MultigraphInstance& instance, const ProblemSpec& spec) {
  check_node_attrs(instance, spec.variant);
  if (instance.attr_dim() != 2) throw SpecMismatch("the policy expects two edge attributes");
  const int n = instance.num_nodes();
  const Variant v = spec.variant;
  int extra = 0;
  if (v == Variant::kOP || v == Variant::kMOOP || v == Variant::kMOCVRP) extra = 1;
  if (v == Variant::kMOTSPTW) extra = 2;
  double horizon = 0.0;
  if (v == Variant::kMOTSPTW) {
    for (const auto& w : instance.node_attrs()->windows) {
      if (std::isfinite(w.close)) horizon = std::max(horizon, w.close);
    }
  }
  const int fd = 2 + extra;
  std::vector<double> out(static_cast<size_t>(instance.total_edges()) * fd);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int l = 0; l < instance.num_edges(a, b); ++l) {
        double* row = out.data() + static_cast<size_t>(instance.first_edge(a, b) + l) * fd;
        auto e = instance.edge(a, b, l);
        row[0] = e[0];
        row[1] = e[1];
        switch (v) {
          case Variant::kOP:
          case Variant::kMOOP: row[2] = instance.node_attrs()->prize[b]; break;
          case Variant::kMOCVRP: row[2] = instance.node_attrs()->demand[b] / spec.capacity; break;
          case Variant::kMOTSPTW: {
            const auto& w = instance.node_attrs()->windows[b];
            row[2] = std::min(w.open, horizon);
            row[3] = std::min(w.close, horizon);
            break;
          }
          default: break;
        }
      }
    }
  }
  return out;
}

std::vector<double> decoder_cost_weights(Variant variant, const Preference& pref) {
  switch (variant) {
    case Variant::kMOTSP:
    case Variant::kMOCVRP: return {pref[0], pref[1]};
    case Variant::kOP: return {0.5, 0.5};
    case Variant::kMOOP:
    case Variant::kMOTSPTW: return {pref[1], 0.0};
    default: return {1.0, 0.0};
  }
}

double fsasp_cost_term(std::span<const double> edge, Variant variant, const Preference& pref) {
  if (!is_multi_objective(variant)) return edge[0];
  return linear_cost(std::vector<double>(edge.begin(), edge.begin() + pref.size()), pref);
}

Tensor multi_pointer_scores(const Tensor& q, const Tensor& k, const Tensor& wq, const Tensor& wk,
                            int heads, int scale_dim) {
  return nn::scale(nn::matmul_nt(nn::matmul(q, wq), nn::matmul(k, wk)),
                   1.0 / (heads * std::sqrt(static_cast<double>(scale_dim))));
}

Tensor clipped_log_probs(const Tensor& scores, const Tensor& cost, const Tensor& beta, double clip,
                         std::span<const char> mask) {
  Tensor s = cost.defined() ? nn::sub(scores, nn::mul(cost, beta)) : scores;
  if (clip > 0.0) s = nn::scale(nn::tanh(s), clip);
  return nn::log_softmax_rows(s, mask);
}

NepfModel::NepfModel(ModelConfig config) : config_(config) {
  config_.validate();
  const int d = config_.d, de = config_.d_edge, fd = config_.feature_dim(), f = config_.ffn_hidden;
  add_param("pre.w_g", fd, d, fd);
  add_param("pre.phi1.w", d, d, d);
  add_fill("pre.phi1.b", 1, d, 0.0);
  add_param("pre.phi2.w", d, d, d);
  add_fill("pre.phi2.b", 1, d, 0.0);
  add_param("pre.rho1.w", d, d, d);
  add_fill("pre.rho1.b", 1, d, 0.0);
  add_param("pre.rho2.w", d, d, d);
  add_fill("pre.rho2.b", 1, d, 0.0);
  for (int l = 0; l < config_.great_layers; ++l) {
    const std::string g = "great" + std::to_string(l) + ".";
    add_param(g + "gate_out", d, 1, d);
    add_param(g + "gate_in", d, 1, d);
    add_param(g + "w_out", d, d / 2, d);
    add_param(g + "w_in", d, d / 2, d);
    if (l + 1 < config_.great_layers) {
      add_param(g + "proj_a", d, d, 2 * d);
      add_param(g + "proj_b", d, d, 2 * d);
      add_fill(g + "norm1.g", 1, d, 1.0);
      add_fill(g + "norm1.b", 1, d, 0.0);
      add_param(g + "ffn1.w", d, f, d);
      add_fill(g + "ffn1.b", 1, f, 0.0);
      add_param(g + "ffn2.w", f, d, f);
      add_fill(g + "ffn2.b", 1, d, 0.0);
      add_fill(g + "norm2.g", 1, d, 1.0);
      add_fill(g + "norm2.b", 1, d, 0.0);
    } else {
      add_fill(g + "norm.g", 1, d, 1.0);
      add_fill(g + "norm.b", 1, d, 0.0);
    }
  }
  for (int l = 0; l < config_.transformer_layers; ++l) {
    const std::string t = "tf" + std::to_string(l) + ".";
    for (const char* w : {"wq", "wk", "wv", "wo"}) add_param(t + w, d, d, d);
    add_fill(t + "norm1.g", 1, d, 1.0);
    add_fill(t + "norm1.b", 1, d, 0.0);
    add_param(t + "ffn1.w", d, f, d);
    add_fill(t + "ffn1.b", 1, f, 0.0);
    add_param(t + "ffn2.w", f, d, f);
    add_fill(t + "ffn2.b", 1, d, 0.0);
    add_fill(t + "norm2.g", 1, d, 1.0);
    add_fill(t + "norm2.b", 1, d, 0.0);
  }
  for (const char* w : {"dec.w1", "dec.w2", "dec.w3", "dec.w4"}) add_param(w, d, d, d);
  const int sd = config_.state_dim();
  if (sd > 0) add_param("dec.w5", sd, d, sd);
  if (!config_.multi_objective) {
    add_param("dec.wq", d, d, d);
    add_param("dec.wk", d, d, d);
  }
  add_fill("dec.beta", 1, 1, 1.0);
  if (config_.state_estimator) {
    add_param("est.w_ih", d, 4 * d, d);
    add_param("est.w_hh", d, 4 * d, d);
    add_fill("est.b", 1, 4 * d, 0.0);
    add_param("est.w_state", d, sd, d);
  }
  if (config_.edge_stage == EdgeStage::kLearned) {
    const int hd = de / 2;
    add_param("edge.w_f", fd, de, fd);
    for (const char* dir : {"edge.fwd.", "edge.bwd."}) {
      add_param(std::string(dir) + "w_ih", de, 4 * hd, de);
      add_param(std::string(dir) + "w_hh", hd, 4 * hd, hd);
      add_fill(std::string(dir) + "b", 1, 4 * hd, 0.0);
    }
    if (!config_.multi_objective) {
      add_param("edge.wq", de, de, de);
      add_param("edge.wk", de, de, de);
    }
    add_fill("edge.beta", 1, 1, 1.0);
  }
  if (config_.multi_objective) {
    const int m = 2, hh = config_.hyper_hidden;
    add_param("hyper_node.l1.w", m, hh, m);
    add_fill("hyper_node.l1.b", 1, hh, 0.0);
    add_param("hyper_node.l2.w", hh, 2 * d * d, hh);
    add_fill("hyper_node.l2.b", 1, 2 * d * d, 0.0);
    if (config_.edge_stage == EdgeStage::kLearned) {
      add_param("hyper_edge.l1.w", m, hh, m);
      add_fill("hyper_edge.l1.b", 1, hh, 0.0);
      add_param("hyper_edge.l2.w", hh, 2 * de * de, hh);
      add_fill("hyper_edge.l2.b", 1, 2 * de * de, 0.0);
    }
  }
}

void NepfModel::add_param(const std::string& name, int rows, int cols, int fan_in) {
  CounterRng rng(config_.init_seed, {static_cast<uint64_t>(params_.size())});
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(static_cast<size_t>(rows) * cols);
  for (double& x : v) x = rng.uniform(-bound, bound);
  params_.add(name, rows, cols, std::move(v));
}

void NepfModel::add_fill(const std::string& name, int rows, int cols, double value) {
  params_.add(name, rows, cols, std::vector<double>(static_cast<size_t>(rows) * cols, value));
}

int NepfModel::max_starts(int n) const {
  return (config_.variant == Variant::kMOTSP || config_.variant == Variant::kRCTSP) ? n : n - 1;
}

Tensor NepfModel::linear(const Tensor& x, const std::string& name, bool bias) const {
  Tensor y = nn::matmul(x, p(name + ".w"));
  return bias ? nn::add(y, p(name + ".b")) : y;
}

Tensor NepfModel::affine_norm(const Tensor& x, const std::string& name) const {
  return nn::add(nn::mul(nn::layer_norm_rows(x), p(name + ".g")), p(name + ".b"));
}

Tensor NepfModel::pre_encode(const MultigraphInstance& instance, const ProblemSpec& spec) const {
  if (spec.variant != config_.variant) throw SpecMismatch("instance variant differs from the model");
  const int n = instance.num_nodes();
  const int fd = config_.feature_dim();
  std::vector<double> feats = edge_features(instance, spec);
  const int e = instance.total_edges();
  std::vector<int> pair_of_edge(e);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      for (int l = 0; l < instance.num_edges(u, v); ++l) pair_of_edge[instance.first_edge(u, v) + l] = u * n + v;
    }
  }
  Tensor g = nn::matmul(Tensor::constant(e, fd, std::move(feats)), p("pre.w_g"));
  Tensor phi = linear(nn::relu(linear(g, "pre.phi1")), "pre.phi2");
  Tensor pooled = nn::segment_sum(phi, pair_of_edge, n * n);
  return linear(nn::relu(linear(pooled, "pre.rho1")), "pre.rho2");
}

Tensor NepfModel::great_node_features(int layer, const Tensor& distances, int n) const {
  if (n < 2) throw std::invalid_argument("GREAT layers need at least two nodes");
  const std::string g = "great" + std::to_string(layer) + ".";
  const std::vector<char> mask = diag_mask(n);
  std::vector<int> transposed(static_cast<size_t>(n) * n), source(static_cast<size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      transposed[u * n + v] = v * n + u;
      source[u * n + v] = u;
    }
  }
  // alpha'_uv from D_uv, alpha''_uv from D_vu, each normalised over v != u.
  Tensor a_out = nn::reshape(
      nn::softmax_rows(nn::reshape(nn::matmul(distances, p(g + "gate_out")), n, n), mask), n * n, 1);
  Tensor a_in = nn::reshape(
      nn::softmax_rows(nn::transpose(nn::reshape(nn::matmul(distances, p(g + "gate_in")), n, n)), mask),
      n * n, 1);
  Tensor out_part = nn::mul(nn::matmul(distances, p(g + "w_out")), a_out);
  Tensor in_part = nn::mul(nn::gather_rows(nn::matmul(distances, p(g + "w_in")), transposed), a_in);
  return nn::segment_sum(nn::concat_cols({out_part, in_part}), source, n);
}

Tensor NepfModel::great_layer(int layer, const Tensor& distances, int n) const {
  const std::string g = "great" + std::to_string(layer) + ".";
  Tensor x = great_node_features(layer, distances, n);
  std::vector<int> us(static_cast<size_t>(n) * n), vs(static_cast<size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      us[u * n + v] = u;
      vs[u * n + v] = v;
    }
  }
  // W'''(x_u || x_v) with W''' split into its two column blocks.
  Tensor update = nn::add(nn::gather_rows(nn::matmul(x, p(g + "proj_a")), us),
                          nn::gather_rows(nn::matmul(x, p(g + "proj_b")), vs));
  Tensor d1 = affine_norm(nn::add(distances, update), g + "norm1");
  Tensor ff = linear(nn::relu(linear(d1, g + "ffn1")), g + "ffn2");
  return affine_norm(nn::add(d1, ff), g + "norm2");
}

Tensor NepfModel::transformer_layer(int layer, const Tensor& h) const {
  const std::string t = "tf" + std::to_string(layer) + ".";
  const int d = config_.d, heads = config_.heads, dk = d / heads;
  Tensor q = nn::matmul(h, p(t + "wq"));
  Tensor k = nn::matmul(h, p(t + "wk"));
  Tensor v = nn::matmul(h, p(t + "wv"));
  std::vector<Tensor> outs;
  for (int hd = 0; hd < heads; ++hd) {
    Tensor s = nn::scale(nn::matmul_nt(nn::slice_cols(q, hd * dk, dk), nn::slice_cols(k, hd * dk, dk)),
                         1.0 / std::sqrt(static_cast<double>(dk)));
    outs.push_back(nn::matmul(nn::softmax_rows(s), nn::slice_cols(v, hd * dk, dk)));
  }
  Tensor att = nn::matmul(heads == 1 ? outs[0] : nn::concat_cols(outs), p(t + "wo"));
  Tensor h1 = affine_norm(nn::add(h, att), t + "norm1");
  Tensor ff = linear(nn::relu(linear(h1, t + "ffn1")), t + "ffn2");
  return affine_norm(nn::add(h1, ff), t + "norm2");
}

Tensor NepfModel::encode(const Tensor& distances, int n) const {
  Tensor d = distances;
  const int last = config_.great_layers - 1;
  for (int l = 0; l < last; ++l) d = great_layer(l, d, n);
  Tensor h = affine_norm(great_node_features(last, d, n), "great" + std::to_string(last) + ".norm");
  for (int l = 0; l < config_.transformer_layers; ++l) h = transformer_layer(l, h);
  return h;
}

EncodedInstance NepfModel::encode_instance(const MultigraphInstance& instance,
                                           const ProblemSpec& spec) const {
  EncodedInstance enc;
  enc.n = instance.num_nodes();
  enc.distances = pre_encode(instance, spec);
  enc.nodes = encode(enc.distances, enc.n);
  return enc;
}

PointerWeights NepfModel::pointer_weights(const Preference& pref) const {
  PointerWeights w;
  const int d = config_.d, de = config_.d_edge;
  const bool learned_edges = config_.edge_stage == EdgeStage::kLearned;
  if (!config_.multi_objective) {
    w.node_q = p("dec.wq");
    w.node_k = p("dec.wk");
    if (learned_edges) {
      w.edge_q = p("edge.wq");
      w.edge_k = p("edge.wk");
    }
    return w;
  }
  if (pref.size() != 2) throw DimMismatch("hypernetworks take a two-component preference");
  Tensor lam = Tensor::constant(1, 2, {pref[0], pref[1]});
  Tensor node = linear(nn::relu(linear(lam, "hyper_node.l1")), "hyper_node.l2");
  w.node_q = nn::reshape(nn::slice_cols(node, 0, d * d), d, d);
  w.node_k = nn::reshape(nn::slice_cols(node, d * d, d * d), d, d);
  if (learned_edges) {
    Tensor edge = linear(nn::relu(linear(lam, "hyper_edge.l1")), "hyper_edge.l2");
    w.edge_q = nn::reshape(nn::slice_cols(edge, 0, de * de), de, de);
    w.edge_k = nn::reshape(nn::slice_cols(edge, de * de, de * de), de, de);
  }
  return w;
}

NodeRollout NepfModel::rollout(const EncodedInstance& enc, const MultigraphInstance& instance,
                               const ProblemSpec& spec, const Preference& pref,
                               const PointerWeights& w, const RolloutOptions& options) const {
  const Variant variant = config_.variant;
  const int n = instance.num_nodes();
  const bool depot_start = variant != Variant::kMOTSP && variant != Variant::kRCTSP;
  const bool orienteering = is_orienteering_variant(variant);
  const bool cvrp = variant == Variant::kMOCVRP;
  int k1 = options.forced ? static_cast<int>(options.forced->size())
                          : (options.k1 > 0 ? options.k1 : max_starts(n));
  if (k1 <= 0 || k1 > max_starts(n)) throw std::invalid_argument("K1 out of range for this instance");
  const int d = config_.d, sd = config_.state_dim();
  const Tensor& h = enc.nodes;

  struct Row {
    std::vector<int> nodes;
    std::vector<char> visited;
    double load = 0.0;
    bool done = false;
  };
  std::vector<Row> rows(k1);
  for (int j = 0; j < k1; ++j) {
    Row& r = rows[j];
    r.visited.assign(n, 0);
    std::vector<int> prefix;
    if (options.forced) {
      const auto& f = (*options.forced)[j];
      const size_t len = depot_start ? 2 : 1;
      if (f.size() < len + 1) throw StructuralError("forced route too short");
      prefix.assign(f.begin(), f.begin() + len);
    } else {
      prefix = depot_start ? std::vector<int>{kDepot, j + 1} : std::vector<int>{j};
    }
    for (int u : prefix) {
      r.nodes.push_back(u);
      r.visited[u] = 1;
      if (cvrp && u != kDepot) r.load += instance.node_attrs()->demand[u];
    }
  }

  const std::vector<double> cheap = cheapest_edge_matrix(instance, decoder_cost_weights(variant, pref));
  Tensor hw2 = nn::matmul(h, p("dec.w2"));
  Tensor hw4 = nn::matmul(h, p("dec.w4"));
  Tensor graph_term = nn::matmul(nn::mean_rows(h), p("dec.w3"));
  Tensor keys = nn::matmul(h, w.node_k);
  std::vector<int> firsts(k1);
  for (int j = 0; j < k1; ++j) firsts[j] = rows[j].nodes[0];
  Tensor first_term = nn::gather_rows(nn::matmul(h, p("dec.w1")), firsts);
  const double score_scale = 1.0 / (config_.heads * std::sqrt(static_cast<double>(d)));

  nn::LstmState est;
  if (config_.state_estimator) {
    est = {Tensor::zeros(k1, d), Tensor::zeros(k1, d)};
    const size_t prefix_len = rows[0].nodes.size();
    for (size_t t = 0; t < prefix_len; ++t) {
      std::vector<int> idx(k1);
      for (int j = 0; j < k1; ++j) idx[j] = rows[j].nodes[t];
      est = nn::lstm_cell(nn::gather_rows(h, idx), est, p("est.w_ih"), p("est.w_hh"), p("est.b"));
    }
  }

  std::vector<CounterRng> rngs;
  for (int j = 0; j < k1; ++j) rngs.emplace_back(derive_key(options.rng_key, {static_cast<uint64_t>(j)}));

  NodeRollout out;
  out.step_probs.resize(k1);
  Tensor total;
  const size_t tour_len = static_cast<size_t>(n);
  auto finished = [&](const Row& r) {
    if (r.done) return true;
    if (!depot_start || variant == Variant::kMOTSPTW) return r.nodes.size() == tour_len;
    return false;
  };

  for (;;) {
    bool any_active = false;
    for (auto& r : rows) {
      r.done = finished(r);
      any_active = any_active || !r.done;
    }
    if (!any_active) break;

    std::vector<char> mask(static_cast<size_t>(k1) * n, 0);
    std::vector<double> visited_mean(static_cast<size_t>(k1) * n, 0.0);
    std::vector<double> cost(static_cast<size_t>(k1) * n, 0.0);
    std::vector<double> state(static_cast<size_t>(k1) * std::max(sd, 1), 0.0);
    std::vector<int> lasts(k1);
    for (int j = 0; j < k1; ++j) {
      const Row& r = rows[j];
      const int last = r.nodes.back();
      lasts[j] = last;
      char* m = mask.data() + static_cast<size_t>(j) * n;
      const double inv = 1.0 / static_cast<double>(r.nodes.size());
      for (int u : r.nodes) visited_mean[static_cast<size_t>(j) * n + u] += inv;
      for (int v = 0; v < n; ++v) cost[static_cast<size_t>(j) * n + v] = cheap[static_cast<size_t>(last) * n + v];
      if (cvrp) state[j] = r.load / spec.capacity;
      if (r.done) {
        m[kDepot] = 1;
        continue;
      }
      bool customers_left = false;
      for (int v = 0; v < n; ++v) {
        if (r.visited[v] || (depot_start && v == kDepot)) continue;
        customers_left = true;
        if (cvrp && r.load + instance.node_attrs()->demand[v] > spec.capacity + 1e-12) continue;
        m[v] = 1;
      }
      if (cvrp && last != kDepot) m[kDepot] = 1;
      if (orienteering) m[kDepot] = 1;
      if (!customers_left && depot_start) m[kDepot] = 1;
      if (std::none_of(m, m + n, [](char c) { return c != 0; })) {
        throw NoFeasibleNode("no feasible next node");
      }
    }

    Tensor q = nn::add(nn::add(first_term, nn::gather_rows(hw2, lasts)), graph_term);
    q = nn::add(q, nn::matmul(Tensor::constant(k1, n, std::move(visited_mean)), hw4));
    if (config_.state_estimator) {
      Tensor s_hat = nn::matmul(est.h, p("est.w_state"));
      out.state_estimates.push_back(s_hat);
      std::vector<int> pos(k1);
      for (int j = 0; j < k1; ++j) pos[j] = rows[j].done ? -1 : static_cast<int>(rows[j].nodes.size()) - 1;
      out.state_positions.push_back(std::move(pos));
      q = nn::add(q, nn::matmul(s_hat, p("dec.w5")));
    } else if (sd > 0) {
      q = nn::add(q, nn::matmul(Tensor::constant(k1, sd, std::move(state)), p("dec.w5")));
    }
    Tensor scores = nn::scale(nn::matmul_nt(nn::matmul(q, w.node_q), keys), score_scale);
    Tensor logp = clipped_log_probs(scores, Tensor::constant(k1, n, std::move(cost)), p("dec.beta"),
                                    config_.clip_node, mask);

    std::vector<int> chosen(k1);
    auto lp = logp.data();
    for (int j = 0; j < k1; ++j) {
      const Row& r = rows[j];
      std::span<const double> row_lp = lp.subspan(static_cast<size_t>(j) * n, n);
      std::span<const char> row_mask(mask.data() + static_cast<size_t>(j) * n, n);
      if (r.done) {
        chosen[j] = kDepot;
      } else if (options.forced) {
        const auto& f = (*options.forced)[j];
        if (r.nodes.size() >= f.size()) throw StructuralError("forced route ended early");
        chosen[j] = f[r.nodes.size()];
        if (chosen[j] < 0 || chosen[j] >= n || !row_mask[chosen[j]]) {
          throw StructuralError("forced route takes a masked node");
        }
      } else if (options.greedy) {
        chosen[j] = argmax_allowed(row_lp, row_mask);
      } else {
        chosen[j] = sample_allowed(row_lp, row_mask, rngs[j].uniform());
      }
      if (!r.done) out.step_probs[j].push_back(std::exp(row_lp[chosen[j]]));
    }
    Tensor picked = nn::pick(logp, chosen);
    total = total.defined() ? nn::add(total, picked) : picked;

    for (int j = 0; j < k1; ++j) {
      Row& r = rows[j];
      if (r.done) continue;
      const int v = chosen[j];
      r.nodes.push_back(v);
      if (v == kDepot && depot_start) {
        if (orienteering) r.done = true;
        if (cvrp) {
          r.load = 0.0;
          bool left = false;
          for (int u = 1; u < n; ++u) left = left || !r.visited[u];
          if (!left) r.done = true;
        }
      } else {
        r.visited[v] = 1;
        if (cvrp) r.load += instance.node_attrs()->demand[v];
      }
    }
    if (config_.state_estimator) {
      est = nn::lstm_cell(nn::gather_rows(h, chosen), est, p("est.w_ih"), p("est.w_hh"), p("est.b"));
    }
  }

  out.log_prob = total.defined() ? total : Tensor::zeros(k1, 1);
  for (auto& r : rows) {
    if (!depot_start) r.nodes.push_back(r.nodes.front());
    if (variant == Variant::kMOTSPTW) r.nodes.push_back(kDepot);
    out.routes.push_back(std::move(r.nodes));
  }
  if (options.forced) {
    for (int j = 0; j < k1; ++j) {
      if (out.routes[j] != (*options.forced)[j]) throw StructuralError("forced route is not a valid rollout");
    }
  }
  return out;
}

EdgeSamples NepfModel::select_edges(const MultigraphInstance& instance, const ProblemSpec& spec,
                                    const std::vector<std::vector<int>>& routes,
                                    const Preference& pref, const PointerWeights& w,
                                    const EdgeSampleOptions& options) const {
  EdgeSamples out;
  const int k1 = static_cast<int>(routes.size());
  if (config_.edge_stage == EdgeStage::kGreedy) {
    const Preference greedy_pref = config_.multi_objective ? pref : Preference::bi(1.0);
    for (const auto& r : routes) out.selections.push_back({fsasp_greedy_linear(instance, r, greedy_pref)});
    return out;
  }
  const int k2 = options.forced ? static_cast<int>((*options.forced)[0].size()) : options.k2;
  if (k2 <= 0) throw std::invalid_argument("K2 must be positive");
  const int de = config_.d_edge, hd = de / 2, fd = config_.feature_dim();

  // Sets in (route, position) order.
  std::vector<int> set_start(k1 + 1, 0);
  std::vector<int> edge_idx, set_of_edge;
  std::vector<double> inv_count, cost;
  out.set_offsets.push_back(0);
  int num_sets = 0;
  for (int j = 0; j < k1; ++j) {
    validate_node_sequence(instance, spec.variant, routes[j]);
    for (size_t t = 0; t + 1 < routes[j].size(); ++t) {
      const int u = routes[j][t], v = routes[j][t + 1];
      const int m = instance.num_edges(u, v);
      for (int l = 0; l < m; ++l) {
        edge_idx.push_back(instance.first_edge(u, v) + l);
        set_of_edge.push_back(num_sets);
        cost.push_back(fsasp_cost_term(instance.edge(u, v, l), spec.variant, pref));
      }
      inv_count.push_back(1.0 / m);
      out.set_offsets.push_back(static_cast<int>(edge_idx.size()));
      ++num_sets;
    }
    set_start[j + 1] = num_sets;
  }
  auto len = [&](int j) { return set_start[j + 1] - set_start[j]; };
  int max_len = 0;
  for (int j = 0; j < k1; ++j) {
    if (len(j) == 0) throw StructuralError("route without edges has nothing to select");
    max_len = std::max(max_len, len(j));
  }

  std::vector<double> feats = edge_features(instance, spec);
  Tensor femb = nn::matmul(Tensor::constant(instance.total_edges(), fd, std::move(feats)), p("edge.w_f"));
  Tensor keys = nn::gather_rows(femb, edge_idx);
  Tensor pooled = nn::mul(nn::segment_sum(keys, set_of_edge, num_sets),
                          Tensor::constant(num_sets, 1, std::move(inv_count)));

  // Bidirectional LSTM over each route's sets, batched over routes; padded
  // steps reuse a valid set and their outputs are never read.
  auto run = [&](const char* dir, bool reverse) {
    const std::string pre = std::string("edge.") + dir + ".";
    nn::LstmState st{Tensor::zeros(k1, hd), Tensor::zeros(k1, hd)};
    std::vector<Tensor> outs;
    for (int s = 0; s < max_len; ++s) {
      std::vector<int> idx(k1);
      for (int j = 0; j < k1; ++j) {
        const int pos = s < len(j) ? (reverse ? len(j) - 1 - s : s) : 0;
        idx[j] = set_start[j] + pos;
      }
      st = nn::lstm_cell(nn::gather_rows(pooled, idx), st, p(pre + "w_ih"), p(pre + "w_hh"), p(pre + "b"));
      outs.push_back(st.h);
    }
    return nn::concat_rows(outs);
  };
  Tensor fwd = run("fwd", false);
  Tensor bwd = run("bwd", true);
  std::vector<int> fwd_rows(num_sets), bwd_rows(num_sets);
  for (int j = 0; j < k1; ++j) {
    for (int t = 0; t < len(j); ++t) {
      fwd_rows[set_start[j] + t] = t * k1 + j;
      bwd_rows[set_start[j] + t] = (len(j) - 1 - t) * k1 + j;
    }
  }
  Tensor mixed = nn::add(nn::concat_cols({nn::gather_rows(fwd, fwd_rows), nn::gather_rows(bwd, bwd_rows)}),
                         pooled);

  Tensor q = nn::gather_rows(nn::matmul(mixed, w.edge_q), set_of_edge);
  Tensor raw = nn::scale(nn::sum_cols(nn::mul(q, nn::matmul(keys, w.edge_k))),
                         1.0 / (config_.heads * std::sqrt(static_cast<double>(de))));
  const int num_edges = static_cast<int>(cost.size());
  Tensor s = nn::sub(raw, nn::mul(Tensor::constant(num_edges, 1, std::move(cost)),
                                  p("edge.beta")));
  if (config_.clip_edge > 0.0) s = nn::scale(nn::tanh(s), config_.clip_edge);
  Tensor logp = nn::segment_log_softmax(s, set_of_edge, num_sets);
  out.edge_log_probs = logp;

  auto lp = logp.data();
  std::vector<int> chosen_flat, group;
  out.selections.assign(k1, std::vector<std::vector<int>>(k2));
  for (int j = 0; j < k1; ++j) {
    for (int k = 0; k < k2; ++k) {
      CounterRng rng(derive_key(options.rng_key, {static_cast<uint64_t>(j), static_cast<uint64_t>(k)}));
      auto& sel = out.selections[j][k];
      for (int t = 0; t < len(j); ++t) {
        const int sid = set_start[j] + t;
        const int lo = out.set_offsets[sid], hi = out.set_offsets[sid + 1];
        std::span<const double> probs = lp.subspan(lo, hi - lo);
        int pick;
        if (options.forced) {
          pick = (*options.forced)[j][k].at(t);
          if (pick < 0 || pick >= hi - lo) throw StructuralError("forced edge index out of range");
        } else if (options.greedy) {
          pick = argmax_allowed(probs, {});
        } else {
          pick = sample_allowed(probs, {}, rng.uniform());
        }
        sel.push_back(pick);
        chosen_flat.push_back(lo + pick);
        group.push_back(j * k2 + k);
      }
    }
  }
  out.log_prob = nn::segment_sum(nn::gather_rows(logp, chosen_flat), group, k1 * k2);
  return out;
}

}  // namespace mgroute
