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

// Scalarisation, dominance filtering and hypervolume for minimisation
// problems.

#ifndef MGROUTE_PARETO_H_
#define MGROUTE_PARETO_H_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mgroute {

class DimMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ReferenceDominated : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-negative weights summing to one.
class Preference {
 public:
  explicit Preference(std::vector<double> lambda);
  // (l1, 1 - l1).
  static Preference bi(double lambda1) { return Preference({lambda1, 1.0 - lambda1}); }

  std::span<const double> weights() const { return lambda_; }
  size_t size() const { return lambda_.size(); }
  double operator[](size_t i) const { return lambda_[i]; }

 private:
  std::vector<double> lambda_;
};

// max_i lambda_i |C_i - z*_i|
double chebyshev_cost(std::span<const double> objectives, const Preference& pref,
                      std::span<const double> ideal);
// sum_i lambda_i C_i
double linear_cost(std::span<const double> objectives, const Preference& pref);

// a <= b componentwise with at least one strict inequality.
bool dominates(std::span<const double> a, std::span<const double> b);
// a <= b componentwise.
bool weakly_dominates(std::span<const double> a, std::span<const double> b);

// 101 evenly spaced bi-objective preferences, lambda_1 = 0, 0.01, ..., 1.
std::vector<Preference> preference_grid(int count = 101);

struct ArchivePoint {
  std::vector<double> objectives;
  int64_t route_id = -1;
};

// Mutually non-dominated objective vectors. A point that is weakly dominated
// by an incumbent (including an exact duplicate) is rejected, so the archive
// is a set.
class ParetoArchive {
 public:
  explicit ParetoArchive(int dim) : dim_(dim), ideal_(dim, 0.0) {}

  // Returns true when the point was added.
  bool insert(std::span<const double> objectives, int64_t route_id = -1);
  // Associative and commutative merge (up to route ids of duplicates).
  ParetoArchive merged(const ParetoArchive& other) const;

  int dim() const { return dim_; }
  size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<ArchivePoint>& points() const { return points_; }
  // Componentwise minimum over the archive; zeros while empty.
  const std::vector<double>& ideal() const { return ideal_; }
  // Objective vectors sorted lexicographically, for set comparisons.
  std::vector<std::vector<double>> sorted_objectives() const;

 private:
  int dim_;
  std::vector<ArchivePoint> points_;
  std::vector<double> ideal_;
};

// Area dominated by `points` and bounded by `reference` (minimisation).
// Every point must satisfy p <= reference componentwise, otherwise
// ReferenceDominated is thrown.
double hypervolume_2d_raw(std::span<const std::vector<double>> points,
                          std::span<const double> reference);
double hypervolume_2d_raw(const ParetoArchive& archive, std::span<const double> reference);
// Raw hypervolume divided by the reference box volume anchored at the origin.
double hypervolume_2d(const ParetoArchive& archive, std::span<const double> reference);

// First grid preference under which archive point `index` attains the
// minimum Chebyshev cost within the archive, if any.
std::optional<Preference> recovering_preference(const ParetoArchive& archive, size_t index,
                                                std::span<const double> ideal,
                                                const std::vector<Preference>& grid);

}  // namespace mgroute

#endif  // MGROUTE_PARETO_H_
