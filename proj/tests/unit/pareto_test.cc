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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "mgroute/pareto.h"
#include "mgroute/rng.h"

namespace mgroute {
namespace {

TEST(Pareto, ChebyshevExamples) {
  std::vector<double> c{10, 20}, z{0, 0};
  EXPECT_EQ(chebyshev_cost(c, Preference::bi(0.5), z), 10.0);
  std::vector<double> z2{3, 1};
  EXPECT_EQ(chebyshev_cost(c, Preference::bi(1.0), z2), 7.0);
  EXPECT_EQ(chebyshev_cost(c, Preference::bi(0.3), c), 0.0);
  std::vector<double> bad{1, 2, 3};
  EXPECT_THROW(chebyshev_cost(bad, Preference::bi(0.5), z), DimMismatch);
}

TEST(Pareto, ChebyshevIsInvariantUnderAxisPermutation) {
  CounterRng rng(1, {});
  for (int t = 0; t < 1000; ++t) {
    const double l = rng.uniform();
    std::vector<double> c{rng.uniform(0, 5), rng.uniform(0, 5)}, z{rng.uniform(), rng.uniform()};
    std::vector<double> cr{c[1], c[0]}, zr{z[1], z[0]};
    EXPECT_EQ(chebyshev_cost(c, Preference::bi(l), z),
              chebyshev_cost(cr, Preference({1.0 - l, l}), zr));
  }
}

TEST(Pareto, LinearExamplesAndReversedSum) {
  std::vector<double> c{10, 20};
  EXPECT_EQ(linear_cost(c, Preference::bi(0.5)), 15.0);
  std::vector<double> c2{3, 99};
  EXPECT_EQ(linear_cost(c2, Preference::bi(1.0)), 3.0);
  CounterRng rng(2, {});
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> w(4), x(4);
    double s = 0;
    for (auto& v : w) s += (v = rng.uniform());
    for (auto& v : w) v /= s;
    for (auto& v : x) v = rng.uniform(0, 100);
    double ref = 0;
    for (int i = 3; i >= 0; --i) ref += w[i] * x[i];
    EXPECT_NEAR(linear_cost(x, Preference(w)), ref, 1e-12);
  }
}

TEST(Pareto, PreferenceValidation) {
  EXPECT_THROW(Preference({0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(Preference({-0.1, 1.1}), std::invalid_argument);
  auto grid = preference_grid();
  ASSERT_EQ(grid.size(), 101u);
  EXPECT_EQ(grid[0][0], 0.0);
  EXPECT_EQ(grid[100][0], 1.0);
  EXPECT_NEAR(grid[37][0], 0.37, 1e-15);
}

TEST(Pareto, InsertExamples) {
  ParetoArchive a(2);
  EXPECT_TRUE(a.insert(std::vector<double>{1, 2}));
  EXPECT_TRUE(a.insert(std::vector<double>{2, 1}));
  EXPECT_FALSE(a.insert(std::vector<double>{2, 2}));
  EXPECT_EQ(a.size(), 2u);
  EXPECT_FALSE(a.insert(std::vector<double>{1, 2}));
  EXPECT_TRUE(a.insert(std::vector<double>{0, 0}));
  EXPECT_EQ(a.sorted_objectives(), (std::vector<std::vector<double>>{{0, 0}}));
  EXPECT_EQ(a.ideal(), (std::vector<double>{0, 0}));
}

std::vector<std::vector<double>> brute_front(const std::vector<std::vector<double>>& pts) {
  std::vector<std::vector<double>> out;
  for (size_t i = 0; i < pts.size(); ++i) {
    bool keep = true;
    for (size_t j = 0; j < pts.size() && keep; ++j) {
      if (j != i && dominates(pts[j], pts[i])) keep = false;
    }
    if (keep && std::find(out.begin(), out.end(), pts[i]) == out.end()) out.push_back(pts[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Pareto, ArchiveMatchesQuadraticOracleAndIsOrderFree) {
  for (int seed = 0; seed < 5; ++seed) {
    CounterRng rng(seed, {3});
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 1000; ++i) {
      // Coarse grid so duplicates and ties occur.
      pts.push_back({std::floor(rng.uniform() * 50), std::floor(rng.uniform() * 50)});
    }
    ParetoArchive a(2), b(2);
    for (auto& p : pts) a.insert(p);
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) b.insert(*it);
    auto oracle = brute_front(pts);
    EXPECT_EQ(a.sorted_objectives(), oracle);
    EXPECT_EQ(b.sorted_objectives(), oracle);
    for (const auto& p : a.points())
      for (const auto& q : a.points())
        EXPECT_FALSE(dominates(p.objectives, q.objectives));
    // Merge of two halves equals the whole.
    ParetoArchive h1(2), h2(2);
    for (size_t i = 0; i < pts.size(); ++i) (i % 2 ? h1 : h2).insert(pts[i]);
    EXPECT_EQ(h1.merged(h2).sorted_objectives(), oracle);
    EXPECT_EQ(h2.merged(h1).sorted_objectives(), oracle);
  }
}

double grid_hv(const std::vector<std::vector<double>>& pts, const std::vector<double>& ref, int g) {
  long covered = 0;
  for (int i = 0; i < g; ++i) {
    const double x = (i + 0.5) * ref[0] / g;
    for (int j = 0; j < g; ++j) {
      const double y = (j + 0.5) * ref[1] / g;
      for (const auto& p : pts) {
        if (p[0] <= x && p[1] <= y) {
          ++covered;
          break;
        }
      }
    }
  }
  return static_cast<double>(covered) / (static_cast<double>(g) * g) * ref[0] * ref[1];
}

TEST(Pareto, HypervolumeExamples) {
  std::vector<std::vector<double>> pts{{1, 3}, {2, 2}, {3, 1}};
  std::vector<double> ref{4, 4};
  EXPECT_DOUBLE_EQ(hypervolume_2d_raw(pts, ref), 6.0);
  EXPECT_NEAR(grid_hv(pts, ref, 1000), 6.0, 1e-3 * 16);
  ParetoArchive a(2);
  for (auto& p : pts) a.insert(p);
  EXPECT_DOUBLE_EQ(hypervolume_2d(a, ref), 6.0 / 16.0);
  std::vector<std::vector<double>> at_ref{{4, 4}};
  EXPECT_EQ(hypervolume_2d_raw(at_ref, ref), 0.0);
  std::vector<std::vector<double>> outside{{5, 1}};
  EXPECT_THROW(hypervolume_2d_raw(outside, ref), ReferenceDominated);
  EXPECT_EQ(hypervolume_2d(ParetoArchive(2), ref), 0.0);
}

TEST(Pareto, HypervolumeMatchesGridIntegration) {
  for (int seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed, {4});
    ParetoArchive a(2);
    const int k = 1 + static_cast<int>(rng.below(15));
    for (int i = 0; i < k; ++i) a.insert(std::vector<double>{rng.uniform(), rng.uniform()});
    std::vector<double> ref{1, 1};
    EXPECT_NEAR(hypervolume_2d(a, ref), grid_hv(a.sorted_objectives(), ref, 800), 3e-3);
  }
}

TEST(Pareto, HypervolumeIsMonotoneUnderInsertion) {
  CounterRng rng(5, {});
  std::vector<double> ref{1, 1};
  for (int t = 0; t < 200; ++t) {
    ParetoArchive a(2);
    double prev = 0.0;
    for (int i = 0; i < 20; ++i) {
      a.insert(std::vector<double>{rng.uniform(), rng.uniform()});
      const double hv = hypervolume_2d(a, ref);
      EXPECT_GE(hv, prev);
      prev = hv;
    }
  }
}

TEST(Pareto, EveryArchivePointHasARecoveringPreference) {
  auto grid = preference_grid();
  std::vector<double> ideal{0, 0};
  for (int seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed, {6});
    ParetoArchive a(2);
    // Points on a convex front are all recoverable at grid resolution.
    for (int i = 0; i < 8; ++i) {
      const double x = 0.05 + 0.9 * i / 7.0 + 0.001 * rng.uniform();
      a.insert(std::vector<double>{x, (1 - x) * (1 - x) + 0.05});
    }
    for (size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(recovering_preference(a, i, ideal, grid).has_value());
  }
}

}  // namespace
}  // namespace mgroute
