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

#include "mgroute/tensor.h"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_set>

namespace mgroute::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::atomic<uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

std::string shape_str(const Tensor& t) {
  return "{" + std::to_string(t.rows()) + "," + std::to_string(t.cols()) + "}";
}

[[noreturn]] void shape_fail(const char* op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) shape_fail(op, what);
}

std::shared_ptr<Node> new_node(int rows, int cols, std::initializer_list<const Tensor*> inputs) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value.assign(static_cast<size_t>(rows) * cols, 0.0);
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) node->requires_grad = g_grad_enabled;
  }
  if (node->requires_grad) {
    for (const Tensor* t : inputs) node->parents.push_back(t->node());
  }
  return node;
}

std::shared_ptr<Node> new_node_list(int rows, int cols, const std::vector<Tensor>& inputs) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value.assign(static_cast<size_t>(rows) * cols, 0.0);
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) node->requires_grad = g_grad_enabled;
  }
  if (node->requires_grad) {
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
  }
  return node;
}

Tensor finish(std::shared_ptr<Node> node, const char* op) {
  for (double v : node->value) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string(op) + " produced a non-finite value");
  }
  if (!node->requires_grad) node->backward = nullptr;
  return Tensor(std::move(node));
}

// Accumulate into parent i only if it takes gradients.
inline std::vector<double>* parent_grad(Node& self, size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  return &p.grad_buffer();
}

enum class Broadcast { kSame, kScalar, kRow, kCol };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
  shape_fail(op, "cannot broadcast " + shape_str(b) + " onto " + shape_str(a));
}

inline size_t bindex(Broadcast mode, int r, int c, int cols, int bcols) {
  switch (mode) {
    case Broadcast::kSame: return static_cast<size_t>(r) * cols + c;
    case Broadcast::kScalar: return 0;
    case Broadcast::kRow: return static_cast<size_t>(c);
    case Broadcast::kCol: return static_cast<size_t>(r) * bcols;
  }
  return 0;
}

template <typename Fn, typename Dfn>
Tensor unary(const Tensor& a, const char* op, Fn fn, Dfn dfn) {
  auto node = new_node(a.rows(), a.cols(), {&a});
  const auto& x = a.data();
  for (size_t i = 0; i < x.size(); ++i) node->value[i] = fn(x[i]);
  if (node->requires_grad) {
    node->backward = [dfn](Node& self) {
      auto* ga = parent_grad(self, 0);
      if (!ga) return;
      const auto& x = self.parents[0]->value;
      for (size_t i = 0; i < x.size(); ++i) (*ga)[i] += self.grad[i] * dfn(x[i], self.value[i]);
    };
  }
  return finish(node, op);
}

}  // namespace

std::vector<double>& Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  require(rows >= 0 && cols >= 0, "zeros", "negative shape");
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value.assign(static_cast<size_t>(rows) * cols, 0.0);
  node->requires_grad = requires_grad;
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return Tensor(std::move(node));
}

Tensor Tensor::constant(int rows, int cols, std::vector<double> values) {
  require(rows >= 0 && cols >= 0 && values.size() == static_cast<size_t>(rows) * cols, "constant",
          "value count does not match shape");
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return finish(std::move(node), "constant");
}

Tensor Tensor::leaf(int rows, int cols, std::vector<double> values) {
  Tensor t = constant(rows, cols, std::move(values));
  t.node_->requires_grad = true;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor is not a scalar");
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward: loss must be a scalar");
  if (!node_->requires_grad) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
  node_->grad_buffer()[0] += 1.0;
  for (Node* n : order) {
    if (!n->backward) continue;
    if (n->grad.empty()) continue;
    n->backward(*n);
    // Interior gradients are consumed exactly once.
    std::vector<double>().swap(n->grad);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul", shape_str(a) + " x " + shape_str(b));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  auto node = new_node(m, n, {&a, &b});
  MutMap(node->value.data(), m, n).noalias() =
      ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  if (node->requires_grad) {
    node->backward = [m, k, n](Node& self) {
      ConstMap g(self.grad.data(), m, n);
      if (auto* ga = parent_grad(self, 0)) {
        MutMap(ga->data(), m, k).noalias() += g * ConstMap(self.parents[1]->value.data(), k, n).transpose();
      }
      if (auto* gb = parent_grad(self, 1)) {
        MutMap(gb->data(), k, n).noalias() += ConstMap(self.parents[0]->value.data(), m, k).transpose() * g;
      }
    };
  }
  return finish(node, "matmul");
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt", shape_str(a) + " x " + shape_str(b) + "^T");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  auto node = new_node(m, n, {&a, &b});
  MutMap(node->value.data(), m, n).noalias() =
      ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), n, k).transpose();
  if (node->requires_grad) {
    node->backward = [m, k, n](Node& self) {
      ConstMap g(self.grad.data(), m, n);
      if (auto* ga = parent_grad(self, 0)) {
        MutMap(ga->data(), m, k).noalias() += g * ConstMap(self.parents[1]->value.data(), n, k);
      }
      if (auto* gb = parent_grad(self, 1)) {
        MutMap(gb->data(), n, k).noalias() += g.transpose() * ConstMap(self.parents[0]->value.data(), m, k);
      }
    };
  }
  return finish(node, "matmul_nt");
}

Tensor transpose(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  auto node = new_node(n, m, {&a});
  MutMap(node->value.data(), n, m) = ConstMap(a.data().data(), m, n).transpose();
  if (node->requires_grad) {
    node->backward = [m, n](Node& self) {
      if (auto* ga = parent_grad(self, 0)) {
        MutMap(ga->data(), m, n) += ConstMap(self.grad.data(), n, m).transpose();
      }
    };
  }
  return finish(node, "transpose");
}

Tensor reshape(const Tensor& a, int rows, int cols) {
  require(static_cast<size_t>(rows) * cols == a.size(), "reshape",
          shape_str(a) + " to {" + std::to_string(rows) + "," + std::to_string(cols) + "}");
  auto node = new_node(rows, cols, {&a});
  std::copy(a.data().begin(), a.data().end(), node->value.begin());
  if (node->requires_grad) {
    node->backward = [](Node& self) {
      if (auto* ga = parent_grad(self, 0)) {
        for (size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
      }
    };
  }
  return finish(node, "reshape");
}

namespace {

enum class BinOp { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  const Broadcast mode = broadcast_mode(a, b, name);
  const int rows = a.rows(), cols = a.cols(), bcols = b.cols();
  auto node = new_node(rows, cols, {&a, &b});
  const auto& x = a.data();
  const auto& y = b.data();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const size_t i = static_cast<size_t>(r) * cols + c;
      const double yv = y[bindex(mode, r, c, cols, bcols)];
      switch (op) {
        case BinOp::kAdd: node->value[i] = x[i] + yv; break;
        case BinOp::kSub: node->value[i] = x[i] - yv; break;
        case BinOp::kMul: node->value[i] = x[i] * yv; break;
      }
    }
  }
  if (node->requires_grad) {
    node->backward = [mode, rows, cols, bcols, op](Node& self) {
      auto* ga = parent_grad(self, 0);
      auto* gb = parent_grad(self, 1);
      const auto& x = self.parents[0]->value;
      const auto& y = self.parents[1]->value;
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const size_t i = static_cast<size_t>(r) * cols + c;
          const size_t j = bindex(mode, r, c, cols, bcols);
          const double g = self.grad[i];
          switch (op) {
            case BinOp::kAdd:
              if (ga) (*ga)[i] += g;
              if (gb) (*gb)[j] += g;
              break;
            case BinOp::kSub:
              if (ga) (*ga)[i] += g;
              if (gb) (*gb)[j] -= g;
              break;
            case BinOp::kMul:
              if (ga) (*ga)[i] += g * y[j];
              if (gb) (*gb)[j] += g * x[i];
              break;
          }
        }
      }
    };
  }
  return finish(node, name);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kMul, "mul"); }

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid",
               [](double x) {
                 return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const int rows = parts[0].rows();
  std::vector<int> offsets;
  int cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols", "row mismatch");
    offsets.push_back(cols);
    cols += p.cols();
  }
  auto node = new_node_list(rows, cols, parts);
  for (size_t k = 0; k < parts.size(); ++k) {
    const int pc = parts[k].cols();
    const auto& x = parts[k].data();
    for (int r = 0; r < rows; ++r) {
      std::copy(x.begin() + static_cast<size_t>(r) * pc, x.begin() + static_cast<size_t>(r + 1) * pc,
                node->value.begin() + static_cast<size_t>(r) * cols + offsets[k]);
    }
  }
  if (node->requires_grad) {
    node->backward = [rows, cols, offsets](Node& self) {
      for (size_t k = 0; k < self.parents.size(); ++k) {
        auto* g = parent_grad(self, k);
        if (!g) continue;
        const int pc = self.parents[k]->cols;
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < pc; ++c) {
            (*g)[static_cast<size_t>(r) * pc + c] += self.grad[static_cast<size_t>(r) * cols + offsets[k] + c];
          }
        }
      }
    };
  }
  return finish(node, "concat_cols");
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const int cols = parts[0].cols();
  std::vector<size_t> offsets;
  int rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows", "column mismatch");
    offsets.push_back(static_cast<size_t>(rows) * cols);
    rows += p.rows();
  }
  auto node = new_node_list(rows, cols, parts);
  for (size_t k = 0; k < parts.size(); ++k) {
    std::copy(parts[k].data().begin(), parts[k].data().end(), node->value.begin() + offsets[k]);
  }
  if (node->requires_grad) {
    node->backward = [offsets](Node& self) {
      for (size_t k = 0; k < self.parents.size(); ++k) {
        auto* g = parent_grad(self, k);
        if (!g) continue;
        for (size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[offsets[k] + i];
      }
    };
  }
  return finish(node, "concat_rows");
}

Tensor slice_cols(const Tensor& a, int start, int count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols", "range out of bounds");
  const int rows = a.rows(), cols = a.cols();
  auto node = new_node(rows, count, {&a});
  const auto& x = a.data();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < count; ++c) {
      node->value[static_cast<size_t>(r) * count + c] = x[static_cast<size_t>(r) * cols + start + c];
    }
  }
  if (node->requires_grad) {
    node->backward = [rows, cols, start, count](Node& self) {
      if (auto* g = parent_grad(self, 0)) {
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < count; ++c) {
            (*g)[static_cast<size_t>(r) * cols + start + c] += self.grad[static_cast<size_t>(r) * count + c];
          }
        }
      }
    };
  }
  return finish(node, "slice_cols");
}

Tensor slice_rows(const Tensor& a, int start, int count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows", "range out of bounds");
  const size_t begin = static_cast<size_t>(start) * a.cols();
  auto node = new_node(count, a.cols(), {&a});
  std::copy(a.data().begin() + begin, a.data().begin() + begin + node->value.size(), node->value.begin());
  if (node->requires_grad) {
    node->backward = [begin](Node& self) {
      if (auto* g = parent_grad(self, 0)) {
        for (size_t i = 0; i < self.grad.size(); ++i) (*g)[begin + i] += self.grad[i];
      }
    };
  }
  return finish(node, "slice_rows");
}

Tensor gather_rows(const Tensor& a, std::span<const int> indices) {
  const int cols = a.cols();
  for (int i : indices) require(i >= 0 && i < a.rows(), "gather_rows", "index out of range");
  auto node = new_node(static_cast<int>(indices.size()), cols, {&a});
  const auto& x = a.data();
  for (size_t r = 0; r < indices.size(); ++r) {
    std::copy(x.begin() + static_cast<size_t>(indices[r]) * cols,
              x.begin() + static_cast<size_t>(indices[r] + 1) * cols, node->value.begin() + r * cols);
  }
  if (node->requires_grad) {
    std::vector<int> idx(indices.begin(), indices.end());
    node->backward = [idx = std::move(idx), cols](Node& self) {
      if (auto* g = parent_grad(self, 0)) {
        for (size_t r = 0; r < idx.size(); ++r) {
          double* dst = g->data() + static_cast<size_t>(idx[r]) * cols;
          const double* src = self.grad.data() + r * cols;
          for (int c = 0; c < cols; ++c) dst[c] += src[c];
        }
      }
    };
  }
  return finish(node, "gather_rows");
}

Tensor segment_sum(const Tensor& a, std::span<const int> segment, int num_segments) {
  require(segment.size() == static_cast<size_t>(a.rows()), "segment_sum", "one segment id per row");
  const int cols = a.cols();
  for (int s : segment) require(s >= 0 && s < num_segments, "segment_sum", "segment out of range");
  auto node = new_node(num_segments, cols, {&a});
  const auto& x = a.data();
  for (size_t r = 0; r < segment.size(); ++r) {
    double* dst = node->value.data() + static_cast<size_t>(segment[r]) * cols;
    for (int c = 0; c < cols; ++c) dst[c] += x[r * cols + c];
  }
  if (node->requires_grad) {
    std::vector<int> seg(segment.begin(), segment.end());
    node->backward = [seg = std::move(seg), cols](Node& self) {
      if (auto* g = parent_grad(self, 0)) {
        for (size_t r = 0; r < seg.size(); ++r) {
          const double* src = self.grad.data() + static_cast<size_t>(seg[r]) * cols;
          for (int c = 0; c < cols; ++c) (*g)[r * cols + c] += src[c];
        }
      }
    };
  }
  return finish(node, "segment_sum");
}

Tensor pick(const Tensor& a, std::span<const int> index) {
  require(index.size() == static_cast<size_t>(a.rows()), "pick", "one index per row");
  const int cols = a.cols();
  for (int i : index) require(i >= 0 && i < cols, "pick", "index out of range");
  auto node = new_node(a.rows(), 1, {&a});
  for (size_t r = 0; r < index.size(); ++r) node->value[r] = a.data()[r * cols + index[r]];
  if (node->requires_grad) {
    std::vector<int> idx(index.begin(), index.end());
    node->backward = [idx = std::move(idx), cols](Node& self) {
      if (auto* g = parent_grad(self, 0)) {
        for (size_t r = 0; r < idx.size(); ++r) (*g)[r * cols + idx[r]] += self.grad[r];
      }
    };
  }
  return finish(node, "pick");
}

Tensor sum(const Tensor& a) {
  auto node = new_node(1, 1, {&a});
  double s = 0.0;
  for (double v : a.data()) s += v;
  node->value[0] = s;
  if (node->requires_grad) {
    node->backward = [](Node& self) {
      if (auto* g = parent_grad(self, 0)) {
        for (double& v : *g) v += self.grad[0];
      }
    };
  }
  return finish(node, "sum");
}

Tensor mean(const Tensor& a) {
  require(a.size() > 0, "mean", "empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_rows(const Tensor& a) {
  const int rows = a.rows(), cols = a.cols();
  auto node = new_node(1, cols, {&a});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) node->value[c] += a.data()[static_cast<size_t>(r) * cols + c];
  }
  if (node->requires_grad) {
    node->backward = [rows, cols](Node& self) {
      if (auto* g = parent_grad(self, 0)) {
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) (*g)[static_cast<size_t>(r) * cols + c] += self.grad[c];
        }
      }
    };
  }
  return finish(node, "sum_rows");
}

Tensor mean_rows(const Tensor& a) {
  require(a.rows() > 0, "mean_rows", "no rows");
  return scale(sum_rows(a), 1.0 / a.rows());
}

Tensor sum_cols(const Tensor& a) {
  const int rows = a.rows(), cols = a.cols();
  auto node = new_node(rows, 1, {&a});
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += a.data()[static_cast<size_t>(r) * cols + c];
    node->value[r] = s;
  }
  if (node->requires_grad) {
    node->backward = [rows, cols](Node& self) {
      if (auto* g = parent_grad(self, 0)) {
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) (*g)[static_cast<size_t>(r) * cols + c] += self.grad[r];
        }
      }
    };
  }
  return finish(node, "sum_cols");
}

namespace {

void check_mask(const Tensor& a, std::span<const char> mask, const char* op) {
  require(mask.empty() || mask.size() == a.size(), op, "mask size does not match");
}

inline bool allowed(std::span<const char> mask, size_t i) { return mask.empty() || mask[i] != 0; }

}  // namespace

Tensor softmax_rows(const Tensor& a, std::span<const char> mask) {
  check_mask(a, mask, "softmax_rows");
  const int rows = a.rows(), cols = a.cols();
  auto node = new_node(rows, cols, {&a});
  const auto& x = a.data();
  for (int r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r) * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cols; ++c) {
      if (allowed(mask, base + c)) mx = std::max(mx, x[base + c]);
    }
    require(std::isfinite(mx), "softmax_rows", "row has no unmasked entry");
    double z = 0.0;
    for (int c = 0; c < cols; ++c) {
      if (allowed(mask, base + c)) {
        node->value[base + c] = std::exp(x[base + c] - mx);
        z += node->value[base + c];
      }
    }
    for (int c = 0; c < cols; ++c) node->value[base + c] /= z;
  }
  if (node->requires_grad) {
    node->backward = [rows, cols](Node& self) {
      auto* g = parent_grad(self, 0);
      if (!g) return;
      for (int r = 0; r < rows; ++r) {
        const size_t base = static_cast<size_t>(r) * cols;
        double dot = 0.0;
        for (int c = 0; c < cols; ++c) dot += self.value[base + c] * self.grad[base + c];
        for (int c = 0; c < cols; ++c) {
          (*g)[base + c] += self.value[base + c] * (self.grad[base + c] - dot);
        }
      }
    };
  }
  return finish(node, "softmax_rows");
}

Tensor log_softmax_rows(const Tensor& a, std::span<const char> mask, double masked_value) {
  check_mask(a, mask, "log_softmax_rows");
  const int rows = a.rows(), cols = a.cols();
  auto node = new_node(rows, cols, {&a});
  const auto& x = a.data();
  std::vector<char> keep(mask.begin(), mask.end());
  for (int r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r) * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cols; ++c) {
      if (allowed(mask, base + c)) mx = std::max(mx, x[base + c]);
    }
    require(std::isfinite(mx), "log_softmax_rows", "row has no unmasked entry");
    double z = 0.0;
    for (int c = 0; c < cols; ++c) {
      if (allowed(mask, base + c)) z += std::exp(x[base + c] - mx);
    }
    const double lse = mx + std::log(z);
    for (int c = 0; c < cols; ++c) {
      node->value[base + c] = allowed(mask, base + c) ? x[base + c] - lse : masked_value;
    }
  }
  if (node->requires_grad) {
    node->backward = [rows, cols, keep = std::move(keep)](Node& self) {
      auto* g = parent_grad(self, 0);
      if (!g) return;
      std::span<const char> m(keep);
      for (int r = 0; r < rows; ++r) {
        const size_t base = static_cast<size_t>(r) * cols;
        double gs = 0.0;
        for (int c = 0; c < cols; ++c) {
          if (allowed(m, base + c)) gs += self.grad[base + c];
        }
        for (int c = 0; c < cols; ++c) {
          if (!allowed(m, base + c)) continue;
          (*g)[base + c] += self.grad[base + c] - std::exp(self.value[base + c]) * gs;
        }
      }
    };
  }
  return finish(node, "log_softmax_rows");
}

Tensor segment_log_softmax(const Tensor& a, std::span<const int> segment, int num_segments) {
  require(a.cols() == 1, "segment_log_softmax", "expects a column vector");
  require(segment.size() == a.size(), "segment_log_softmax", "one segment id per row");
  const auto& x = a.data();
  std::vector<double> mx(num_segments, -std::numeric_limits<double>::infinity());
  for (size_t i = 0; i < segment.size(); ++i) {
    require(segment[i] >= 0 && segment[i] < num_segments, "segment_log_softmax", "segment out of range");
    mx[segment[i]] = std::max(mx[segment[i]], x[i]);
  }
  std::vector<double> z(num_segments, 0.0);
  for (size_t i = 0; i < segment.size(); ++i) z[segment[i]] += std::exp(x[i] - mx[segment[i]]);
  auto node = new_node(a.rows(), 1, {&a});
  for (size_t i = 0; i < segment.size(); ++i) {
    node->value[i] = x[i] - mx[segment[i]] - std::log(z[segment[i]]);
  }
  if (node->requires_grad) {
    std::vector<int> seg(segment.begin(), segment.end());
    node->backward = [seg = std::move(seg), num_segments](Node& self) {
      auto* g = parent_grad(self, 0);
      if (!g) return;
      std::vector<double> gs(num_segments, 0.0);
      for (size_t i = 0; i < seg.size(); ++i) gs[seg[i]] += self.grad[i];
      for (size_t i = 0; i < seg.size(); ++i) {
        (*g)[i] += self.grad[i] - std::exp(self.value[i]) * gs[seg[i]];
      }
    };
  }
  return finish(node, "segment_log_softmax");
}

Tensor layer_norm_rows(const Tensor& a, double eps) {
  const int rows = a.rows(), cols = a.cols();
  require(cols > 0, "layer_norm_rows", "no columns");
  auto node = new_node(rows, cols, {&a});
  std::vector<double> inv_std(rows);
  const auto& x = a.data();
  for (int r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r) * cols;
    double mu = 0.0;
    for (int c = 0; c < cols; ++c) mu += x[base + c];
    mu /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) var += (x[base + c] - mu) * (x[base + c] - mu);
    var /= cols;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < cols; ++c) node->value[base + c] = (x[base + c] - mu) * inv_std[r];
  }
  if (node->requires_grad) {
    node->backward = [rows, cols, inv_std = std::move(inv_std)](Node& self) {
      auto* g = parent_grad(self, 0);
      if (!g) return;
      for (int r = 0; r < rows; ++r) {
        const size_t base = static_cast<size_t>(r) * cols;
        double gm = 0.0, gx = 0.0;
        for (int c = 0; c < cols; ++c) {
          gm += self.grad[base + c];
          gx += self.grad[base + c] * self.value[base + c];
        }
        gm /= cols;
        gx /= cols;
        for (int c = 0; c < cols; ++c) {
          (*g)[base + c] += inv_std[r] * (self.grad[base + c] - gm - self.value[base + c] * gx);
        }
      }
    };
  }
  return finish(node, "layer_norm_rows");
}

Tensor masked_fill(const Tensor& a, std::span<const char> mask, double value) {
  require(mask.size() == a.size(), "masked_fill", "mask size does not match");
  auto node = new_node(a.rows(), a.cols(), {&a});
  for (size_t i = 0; i < a.size(); ++i) node->value[i] = mask[i] ? a.data()[i] : value;
  if (node->requires_grad) {
    std::vector<char> keep(mask.begin(), mask.end());
    node->backward = [keep = std::move(keep)](Node& self) {
      if (auto* g = parent_grad(self, 0)) {
        for (size_t i = 0; i < keep.size(); ++i) {
          if (keep[i]) (*g)[i] += self.grad[i];
        }
      }
    };
  }
  return finish(node, "masked_fill");
}

LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& w_ih,
                    const Tensor& w_hh, const Tensor& bias) {
  const int hidden = state.h.cols();
  require(w_ih.cols() == 4 * hidden && w_hh.cols() == 4 * hidden && bias.cols() == 4 * hidden,
          "lstm_cell", "gate weights must have 4 * hidden columns");
  Tensor gates = add(add(matmul(x, w_ih), matmul(state.h, w_hh)), bias);
  Tensor i = sigmoid(slice_cols(gates, 0, hidden));
  Tensor f = sigmoid(slice_cols(gates, hidden, hidden));
  Tensor g = tanh(slice_cols(gates, 2 * hidden, hidden));
  Tensor o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  Tensor c = add(mul(f, state.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

uint64_t nodes_created() { return g_next_id.load(std::memory_order_relaxed) - 1; }

}  // namespace mgroute::nn
