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

// Dense f64 tensors with define-by-run reverse-mode differentiation.
//
// Every tensor is a matrix: shape {rows, cols}. A vector of length n is
// {1, n} and a scalar is {1, 1}. Ops record a closure on the output node;
// backward() walks nodes reachable from the loss in reverse creation order,
// which is a valid topological order because inputs are always created
// before outputs.
//
// Broadcasting in binary elementwise ops (add, sub, mul) is explicit and
// limited to the second operand:
//   * same shape;
//   * b is {1, cols}: broadcast over rows;
//   * b is {rows, 1}: broadcast over columns;
//   * b is {1, 1}: scalar.
//
// Every op verifies its output is finite and throws NonFiniteError otherwise.
// A graph is owned by its tensors; distinct graphs (one per worker) share
// nothing except read-only leaves.

#ifndef MGROUTE_TENSOR_H_
#define MGROUTE_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgroute::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
  uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  size_t size() const { return value.size(); }
  std::vector<double>& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor constant(int rows, int cols, std::vector<double> values);
  static Tensor scalar(double v) { return constant(1, 1, {v}); }
  // Trainable leaf.
  static Tensor leaf(int rows, int cols, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  size_t size() const { return node_->value.size(); }
  std::span<const double> data() const { return node_->value; }
  // Only valid on leaves; graphs built from the old value are not updated.
  std::span<double> mutable_data() { return node_->value; }
  double at(int r, int c) const { return node_->value[static_cast<size_t>(r) * cols() + c]; }
  double item() const;
  bool requires_grad() const { return node_->requires_grad; }

  // Empty until backward reaches this node.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  // Seeds d(self)/d(self) = 1 and propagates. Requires a {1, 1} tensor.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);     // {m,k} x {k,n}
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // {m,k} x {n,k}^T
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, int rows, int cols);

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);

// Structure.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int start, int count);
Tensor slice_rows(const Tensor& a, int start, int count);
// Row gather (embedding lookup); indices may repeat.
Tensor gather_rows(const Tensor& a, std::span<const int> indices);
// out[s] = sum of rows r with segment[r] == s; {num_segments, cols}.
Tensor segment_sum(const Tensor& a, std::span<const int> segment, int num_segments);
// out[r] = a[r, index[r]]; {rows, 1}.
Tensor pick(const Tensor& a, std::span<const int> index);

// Reductions.
Tensor sum(const Tensor& a);        // {1,1}
Tensor mean(const Tensor& a);       // {1,1}
Tensor sum_rows(const Tensor& a);   // over axis 0 -> {1, cols}
Tensor mean_rows(const Tensor& a);  // over axis 0 -> {1, cols}
Tensor sum_cols(const Tensor& a);   // over axis 1 -> {rows, 1}

// Row-wise normalisations. `mask` (rows*cols, nonzero = allowed) is optional;
// masked entries get probability exactly 0 and log-probability -inf is never
// produced for them because they are excluded from the output gradient and
// filled with `masked_value`.
Tensor softmax_rows(const Tensor& a, std::span<const char> mask = {});
Tensor log_softmax_rows(const Tensor& a, std::span<const char> mask = {},
                        double masked_value = -1e9);
// Log-softmax within segments of a column vector {n, 1}.
Tensor segment_log_softmax(const Tensor& a, std::span<const int> segment, int num_segments);
// Per-row (x - mean) / sqrt(var + eps), population variance.
Tensor layer_norm_rows(const Tensor& a, double eps = 1e-5);
// Entries with mask == 0 replaced by `value` (no gradient flows to them).
Tensor masked_fill(const Tensor& a, std::span<const char> mask, double value);

// LSTM cell with fused gate weights: gates = x w_ih + h w_hh + b laid out as
// [input, forget, cell, output] blocks of width hidden.
struct LstmState {
  Tensor h;
  Tensor c;
};
LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& w_ih,
                    const Tensor& w_hh, const Tensor& bias);

// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Number of graph nodes created so far (diagnostics).
uint64_t nodes_created();

}  // namespace mgroute::nn

#endif  // MGROUTE_TENSOR_H_
