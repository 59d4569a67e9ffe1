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

// Named trainable parameters, AdamW, and the binary checkpoint format.

#ifndef MGROUTE_OPTIM_H_
#define MGROUTE_OPTIM_H_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgroute/tensor.h"

namespace mgroute::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Registration order is the canonical order for optimizer state and
// checkpoints.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, int rows, int cols, std::vector<double> values);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  size_t size() const { return params_.size(); }
  Tensor& operator[](size_t i) { return params_[i]; }
  const Tensor& operator[](size_t i) const { return params_[i]; }
  const std::string& name(size_t i) const { return names_[i]; }
  size_t num_scalars() const;

  void zero_grad();
  // Copies values from a store with identical names and shapes.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::map<std::string, size_t> index_;
};

struct AdamConfig {
  double lr = 1e-4;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with decoupled weight decay:
//   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta).
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParameterStore& params);
  int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  friend void load_checkpoint(const std::string&, ParameterStore&, Adam*, std::string*);
  void ensure_state(const ParameterStore& params);

  AdamConfig config_;
  int64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Layout: magic "MGRCKPT1", u32 version, u32 metadata length + bytes,
// i64 optimizer steps, u32 parameter count, then per parameter: u32 name
// length + bytes, i32 rows, i32 cols, u8 has_moments, f64 values
// [, f64 m, f64 v]. All little-endian. `metadata` is free-form text (the
// model configuration as JSON in practice).
void save_checkpoint(const std::string& path, const ParameterStore& params, const Adam* adam,
                     const std::string& metadata);
// Parameters must already be registered with matching names and shapes.
void load_checkpoint(const std::string& path, ParameterStore& params, Adam* adam,
                     std::string* metadata);
// Reads only the metadata block.
std::string read_checkpoint_metadata(const std::string& path);

}  // namespace mgroute::nn

#endif  // MGROUTE_OPTIM_H_
