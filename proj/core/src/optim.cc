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

#include "mgroute/optim.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mgroute::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'M', 'G', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("checkpoint truncated");
  return v;
}

std::string get_string(std::istream& in) {
  const uint32_t len = get<uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw CheckpointError("checkpoint truncated");
  return s;
}

void get_doubles(std::istream& in, std::vector<double>& v) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw CheckpointError("checkpoint truncated");
}

std::ifstream open_and_check(const std::string& path, std::string* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError("not a checkpoint: " + path);
  const uint32_t version = get<uint32_t>(in);
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  std::string meta = get_string(in);
  if (metadata) *metadata = std::move(meta);
  return in;
}

}  // namespace

Tensor& ParameterStore::add(const std::string& name, int rows, int cols, std::vector<double> values) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name " + name);
  index_[name] = params_.size();
  names_.push_back(name);
  params_.push_back(Tensor::leaf(rows, cols, std::move(values)));
  return params_.back();
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return params_[it->second];
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return params_[it->second];
}

size_t ParameterStore::num_scalars() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.size() != size()) throw std::invalid_argument("parameter sets differ");
  for (size_t i = 0; i < size(); ++i) {
    if (other.names_[i] != names_[i] || other.params_[i].rows() != params_[i].rows() ||
        other.params_[i].cols() != params_[i].cols()) {
      throw std::invalid_argument("parameter mismatch at " + names_[i]);
    }
    auto src = other.params_[i].data();
    auto dst = params_[i].mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

void Adam::ensure_state(const ParameterStore& params) {
  if (m_.size() == params.size()) return;
  m_.clear();
  v_.clear();
  for (size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params[i].size(), 0.0);
    v_.emplace_back(params[i].size(), 0.0);
  }
}

void Adam::step(ParameterStore& params) {
  ensure_state(params);
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto w = p.mutable_data();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t k = 0; k < w.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k];
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
      w[k] -= config_.lr * (update + config_.weight_decay * w[k]);
    }
  }
}

void save_checkpoint(const std::string& path, const ParameterStore& params, const Adam* adam,
                     const std::string& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  out.write(kMagic, 8);
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, static_cast<uint32_t>(metadata.size()));
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  put<int64_t>(out, adam ? adam->steps() : 0);
  put<uint32_t>(out, static_cast<uint32_t>(params.size()));
  const bool moments = adam && adam->first_moments().size() == params.size();
  for (size_t i = 0; i < params.size(); ++i) {
    put<uint32_t>(out, static_cast<uint32_t>(params.name(i).size()));
    out.write(params.name(i).data(), static_cast<std::streamsize>(params.name(i).size()));
    put<int32_t>(out, params[i].rows());
    put<int32_t>(out, params[i].cols());
    put<uint8_t>(out, moments ? 1 : 0);
    std::vector<double> values(params[i].data().begin(), params[i].data().end());
    put_doubles(out, values);
    if (moments) {
      put_doubles(out, adam->first_moments()[i]);
      put_doubles(out, adam->second_moments()[i]);
    }
  }
  if (!out) throw CheckpointError("write failed for " + path);
}

void load_checkpoint(const std::string& path, ParameterStore& params, Adam* adam,
                     std::string* metadata) {
  std::ifstream in = open_and_check(path, metadata);
  const int64_t steps = get<int64_t>(in);
  const uint32_t count = get<uint32_t>(in);
  if (count != params.size()) throw CheckpointError("parameter count mismatch");
  std::vector<std::vector<double>> m(count), v(count);
  bool all_moments = true;
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(in);
    if (name != params.name(i)) throw CheckpointError("parameter name mismatch: " + name);
    const int32_t rows = get<int32_t>(in);
    const int32_t cols = get<int32_t>(in);
    if (rows != params[i].rows() || cols != params[i].cols()) {
      throw CheckpointError("shape mismatch for " + name);
    }
    const bool has_moments = get<uint8_t>(in) != 0;
    std::vector<double> values(params[i].size());
    get_doubles(in, values);
    for (double x : values) {
      if (!std::isfinite(x)) throw CheckpointError("non-finite value in " + name);
    }
    auto dst = params[i].mutable_data();
    std::copy(values.begin(), values.end(), dst.begin());
    if (has_moments) {
      m[i].resize(values.size());
      v[i].resize(values.size());
      get_doubles(in, m[i]);
      get_doubles(in, v[i]);
    } else {
      all_moments = false;
    }
  }
  if (adam) {
    adam->steps_ = steps;
    if (all_moments) {
      adam->m_ = std::move(m);
      adam->v_ = std::move(v);
    } else {
      adam->m_.clear();
      adam->v_.clear();
    }
  }
}

std::string read_checkpoint_metadata(const std::string& path) {
  std::string meta;
  open_and_check(path, &meta);
  return meta;
}

}  // namespace mgroute::nn
