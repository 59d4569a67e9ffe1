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

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>

#include "mgroute/optim.h"
#include "mgroute/oracles.h"
#include "mgroute/tensor.h"

namespace mgroute::nn {
namespace {

using mgroute::oracle::gradient_check;
using mgroute::oracle::random_values;

class TensorTest : public ::testing::Test {
 protected:
  Tensor leaf(int r, int c, double lo = -1.0, double hi = 1.0) {
    return Tensor::leaf(r, c, random_values(static_cast<size_t>(r) * c, rng_, lo, hi));
  }
  Tensor weights(int r, int c) {
    return Tensor::constant(r, c, random_values(static_cast<size_t>(r) * c, rng_));
  }
  // Contracts `out` with fixed random weights so every output entry gets a
  // distinct upstream gradient.
  Tensor contract(const Tensor& out) {
    auto key = std::make_pair(out.rows(), out.cols());
    if (!probes_.count(key)) probes_[key] = weights(out.rows(), out.cols());
    return sum(mul(out, probes_[key]));
  }
  void check(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double tol = 1e-7) {
    EXPECT_LT(gradient_check([&] { return contract(f()); }, leaves), tol);
  }

  CounterRng rng_{2026, {}};
  std::map<std::pair<int, int>, Tensor> probes_;
};

TEST_F(TensorTest, MatmulMatchesTripleLoop) {
  auto a = leaf(7, 5), b = leaf(5, 3);
  auto c = matmul(a, b);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 5; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-12);
    }
  }
  auto bt = transpose(b);
  auto d = matmul_nt(a, bt);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(d.at(i, j), c.at(i, j), 1e-12);
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST_F(TensorTest, SoftmaxOfEqualLogitsIsUniform) {
  auto s = softmax_rows(Tensor::constant(2, 4, std::vector<double>(8, 3.7)));
  for (double v : s.data()) EXPECT_NEAR(v, 0.25, 1e-15);
  std::vector<char> mask{1, 0, 1, 1, 0, 0, 0, 1};
  auto m = softmax_rows(Tensor::constant(2, 4, std::vector<double>(8, 1.0)), mask);
  EXPECT_EQ(m.at(0, 1), 0.0);
  EXPECT_NEAR(m.at(0, 0), 1.0 / 3, 1e-15);
  EXPECT_EQ(m.at(1, 3), 1.0);
  auto l = log_softmax_rows(Tensor::constant(2, 4, std::vector<double>(8, 1.0)), mask);
  EXPECT_EQ(l.at(0, 1), -1e9);
  EXPECT_EQ(l.at(1, 3), 0.0);
}

TEST_F(TensorTest, LayerNormHasZeroMeanUnitVariance) {
  auto x = leaf(5, 16, -3, 7);
  auto y = layer_norm_rows(x, 0.0);
  for (int r = 0; r < 5; ++r) {
    double m = 0, v = 0;
    for (int c = 0; c < 16; ++c) m += y.at(r, c);
    m /= 16;
    for (int c = 0; c < 16; ++c) v += (y.at(r, c) - m) * (y.at(r, c) - m);
    EXPECT_NEAR(m, 0.0, 1e-10);
    EXPECT_NEAR(v / 16, 1.0, 1e-10);
  }
}

TEST_F(TensorTest, SquaredNormGradientIsTwiceTheWeights) {
  auto w = leaf(3, 4);
  sum(square(w)).backward();
  for (size_t i = 0; i < w.size(); ++i) EXPECT_DOUBLE_EQ(w.grad()[i], 2 * w.data()[i]);
}

TEST_F(TensorTest, ConstantLossGivesZeroGradients) {
  auto w = leaf(2, 3);
  sum(sub(w, w)).backward();
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}

TEST_F(TensorTest, GradientsAccumulateAcrossReuse) {
  auto w = leaf(2, 2);
  auto y = add(mul(w, w), w);  // w used three times
  sum(y).backward();
  for (size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w.grad()[i], 2 * w.data()[i] + 1, 1e-15);
}

TEST_F(TensorTest, LinearAlgebraGradients) {
  auto a = leaf(4, 3), b = leaf(3, 5), c = leaf(5, 3);
  check([&] { return matmul(a, b); }, {a, b});
  check([&] { return matmul_nt(a, c); }, {a, c});
  check([&] { return transpose(b); }, {b});
  check([&] { return reshape(b, 5, 3); }, {b});
}

TEST_F(TensorTest, ElementwiseGradientsWithBroadcasting) {
  auto a = leaf(3, 4), same = leaf(3, 4), row = leaf(1, 4), col = leaf(3, 1), sc = leaf(1, 1);
  for (auto* b : {&same, &row, &col, &sc}) {
    check([&] { return add(a, *b); }, {a, *b});
    check([&] { return sub(a, *b); }, {a, *b});
    check([&] { return mul(a, *b); }, {a, *b});
  }
  EXPECT_THROW(add(a, leaf(4, 3)), ShapeError);
  EXPECT_THROW(mul(a, leaf(2, 4)), ShapeError);
}

TEST_F(TensorTest, UnaryGradients) {
  auto a = leaf(3, 4, -2, 2);
  auto pos = leaf(3, 4, 0.2, 3);
  check([&] { return scale(a, -1.7); }, {a});
  check([&] { return add_scalar(a, 0.3); }, {a});
  check([&] { return tanh(a); }, {a});
  check([&] { return sigmoid(a); }, {a});
  check([&] { return exp(a); }, {a});
  check([&] { return log(pos); }, {pos});
  check([&] { return square(a); }, {a});
  // Away from the kink.
  auto r = Tensor::leaf(1, 6, {-1.0, -0.5, -0.1, 0.1, 0.5, 1.2});
  check([&] { return relu(r); }, {r});
}

TEST_F(TensorTest, StructureGradients) {
  auto a = leaf(3, 2), b = leaf(3, 4), c = leaf(2, 2);
  check([&] { return concat_cols({a, b}); }, {a, b});
  check([&] { return concat_rows({a, c}); }, {a, c});
  check([&] { return slice_cols(b, 1, 2); }, {b});
  check([&] { return slice_rows(b, 1, 2); }, {b});
  std::vector<int> idx{2, 0, 2, 1, 2};
  check([&] { return gather_rows(b, idx); }, {b});
  std::vector<int> seg{1, 0, 1};
  check([&] { return segment_sum(b, seg, 3); }, {b});
  std::vector<int> pk{3, 0, 2};
  check([&] { return pick(b, pk); }, {b});
  auto m = std::vector<char>{1, 0, 1, 1, 0, 1, 1, 1, 1, 1, 0, 0};
  check([&] { return masked_fill(b, m, 5.0); }, {b});
  EXPECT_THROW(slice_cols(b, 3, 2), ShapeError);
  EXPECT_THROW(concat_rows({a, b}), ShapeError);
}

TEST_F(TensorTest, ReductionGradients) {
  auto a = leaf(3, 4);
  check([&] { return sum(a); }, {a});
  check([&] { return mean(a); }, {a});
  check([&] { return sum_rows(a); }, {a});
  check([&] { return mean_rows(a); }, {a});
  check([&] { return sum_cols(a); }, {a});
}

TEST_F(TensorTest, NormalisationGradients) {
  auto a = leaf(3, 5, -2, 2);
  std::vector<char> mask{1, 1, 0, 1, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 1};
  check([&] { return softmax_rows(a); }, {a});
  check([&] { return softmax_rows(a, mask); }, {a});
  check([&] { return log_softmax_rows(a); }, {a});
  // Zero the -1e9 fill so it does not swamp the difference quotient.
  check([&] { return masked_fill(log_softmax_rows(a, mask), mask, 0.0); }, {a});
  auto col = leaf(7, 1, -2, 2);
  std::vector<int> seg{0, 0, 1, 2, 2, 2, 1};
  check([&] { return segment_log_softmax(col, seg, 3); }, {col});
  check([&] { return layer_norm_rows(a); }, {a});
}

TEST_F(TensorTest, LstmCellGradients) {
  const int in = 3, hid = 4;
  auto x = leaf(2, in), h = leaf(2, hid), c = leaf(2, hid);
  auto wih = leaf(in, 4 * hid), whh = leaf(hid, 4 * hid), b = leaf(1, 4 * hid);
  check([&] { return lstm_cell(x, {h, c}, wih, whh, b).h; }, {x, h, c, wih, whh, b});
  check([&] { return lstm_cell(x, {h, c}, wih, whh, b).c; }, {x, h, c, wih, whh, b});
  // Forward against the gate equations.
  auto out = lstm_cell(x, {h, c}, wih, whh, b);
  auto g = add(add(matmul(x, wih), matmul(h, whh)), b);
  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  for (int r = 0; r < 2; ++r) {
    for (int j = 0; j < hid; ++j) {
      const double i_ = sig(g.at(r, j)), f_ = sig(g.at(r, hid + j));
      const double gg = std::tanh(g.at(r, 2 * hid + j)), o_ = sig(g.at(r, 3 * hid + j));
      const double cn = f_ * c.at(r, j) + i_ * gg;
      EXPECT_NEAR(out.c.at(r, j), cn, 1e-14);
      EXPECT_NEAR(out.h.at(r, j), o_ * std::tanh(cn), 1e-14);
    }
  }
}

TEST_F(TensorTest, NonFiniteOutputsThrow) {
  auto z = Tensor::constant(1, 2, {0.0, 1.0});
  EXPECT_THROW(log(z), NonFiniteError);
  EXPECT_THROW(exp(Tensor::scalar(1000.0)), NonFiniteError);
}

TEST_F(TensorTest, NoGradGuardSkipsRecording) {
  auto w = leaf(2, 2);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    auto y = mul(w, w);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(y.node()->parents.empty());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(mul(w, w).requires_grad());
}

TEST(Adam, ZeroGradientsAndNoDecayLeaveParameters) {
  ParameterStore ps;
  ps.add("w", 2, 2, {1, -2, 3, 0.5});
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  Adam adam(cfg);
  ps.zero_grad();
  for (int i = 0; i < 10; ++i) adam.step(ps);
  EXPECT_EQ(std::vector<double>(ps[0].data().begin(), ps[0].data().end()),
            (std::vector<double>{1, -2, 3, 0.5}));
}

TEST(Adam, Defaults) {
  AdamConfig cfg;
  EXPECT_EQ(cfg.lr, 1e-4);
  EXPECT_EQ(cfg.weight_decay, 1e-6);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
  ParameterStore ps;
  ps.add("w", 1, 1, {0.5});
  AdamConfig cfg;
  cfg.lr = 1e-3;
  Adam adam(cfg);
  for (int i = 0; i < 10000; ++i) {
    ps.zero_grad();
    sum(square(ps[0])).backward();
    adam.step(ps);
  }
  EXPECT_LT(std::abs(ps[0].item()), 1e-3);
  EXPECT_EQ(adam.steps(), 10000);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore ps;
  ps.add("w", 1, 2, {1.0, -1.0});
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  Adam adam(cfg);
  ps.zero_grad();
  sum(scale(ps[0], 3.0)).backward();
  adam.step(ps);
  // m_hat / sqrt(v_hat) = sign(g) on the first step.
  EXPECT_NEAR(ps[0].data()[0], 0.9, 1e-8);
  EXPECT_NEAR(ps[0].data()[1], -1.1, 1e-8);
}

TEST(Checkpoint, RoundTripsValuesAndMoments) {
  const auto path = (std::filesystem::temp_directory_path() / "mgroute_ckpt_test.bin").string();
  ParameterStore a;
  a.add("x", 2, 3, {1, 2, 3, 4, 5, 6});
  a.add("y", 1, 1, {-7});
  Adam adam;
  a.zero_grad();
  sum(square(a[0])).backward();
  adam.step(a);
  save_checkpoint(path, a, &adam, "{\"k\":1}");
  EXPECT_EQ(read_checkpoint_metadata(path), "{\"k\":1}");

  ParameterStore b;
  b.add("x", 2, 3, std::vector<double>(6, 0.0));
  b.add("y", 1, 1, {0});
  Adam adam2;
  std::string meta;
  load_checkpoint(path, b, &adam2, &meta);
  EXPECT_EQ(meta, "{\"k\":1}");
  for (size_t i = 0; i < 2; ++i)
    EXPECT_EQ(std::vector<double>(a[i].data().begin(), a[i].data().end()),
              std::vector<double>(b[i].data().begin(), b[i].data().end()));
  EXPECT_EQ(adam2.steps(), 1);
  EXPECT_EQ(adam2.first_moments(), adam.first_moments());
  EXPECT_EQ(adam2.second_moments(), adam.second_moments());

  ParameterStore wrong;
  wrong.add("x", 3, 2, std::vector<double>(6, 0.0));
  wrong.add("y", 1, 1, {0});
  EXPECT_THROW(load_checkpoint(path, wrong, nullptr, nullptr), CheckpointError);
  ParameterStore renamed;
  renamed.add("x", 2, 3, std::vector<double>(6, 0.0));
  renamed.add("z", 1, 1, {0});
  EXPECT_THROW(load_checkpoint(path, renamed, nullptr, nullptr), CheckpointError);

  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fputs("garbage", f);
  std::fclose(f);
  EXPECT_THROW(read_checkpoint_metadata(path), CheckpointError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_checkpoint_metadata(path), CheckpointError);
}

}  // namespace
}  // namespace mgroute::nn
