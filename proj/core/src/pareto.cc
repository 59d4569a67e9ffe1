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

#include "mgroute/pareto.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace mgroute {

Preference::Preference(std::vector<double> lambda) : lambda_(std::move(lambda)) {
  if (lambda_.empty()) throw std::invalid_argument("empty preference");
  double sum = 0.0;
  for (double l : lambda_) {
    if (!(l >= 0.0)) throw std::invalid_argument("preference weights must be non-negative");
    sum += l;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("preference weights must sum to one");
  }
}

double chebyshev_cost(std::span<const double> objectives, const Preference& pref,
                      std::span<const double> ideal) {
  if (objectives.size() != pref.size() || ideal.size() != pref.size()) {
    throw DimMismatch("chebyshev_cost: dimension mismatch");
  }
  double worst = 0.0;
  for (size_t i = 0; i < objectives.size(); ++i) {
    worst = std::max(worst, pref[i] * std::abs(objectives[i] - ideal[i]));
  }
  return worst;
}

double linear_cost(std::span<const double> objectives, const Preference& pref) {
  if (objectives.size() != pref.size()) throw DimMismatch("linear_cost: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < objectives.size(); ++i) s += pref[i] * objectives[i];
  return s;
}

bool weakly_dominates(std::span<const double> a, std::span<const double> b) {
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
  }
  return true;
}

bool dominates(std::span<const double> a, std::span<const double> b) {
  bool strict = false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

std::vector<Preference> preference_grid(int count) {
  std::vector<Preference> grid;
  grid.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double l1 = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
    grid.push_back(Preference::bi(l1));
  }
  return grid;
}

bool ParetoArchive::insert(std::span<const double> objectives, int64_t route_id) {
  if (static_cast<int>(objectives.size()) != dim_) throw DimMismatch("archive dimension mismatch");
  for (double x : objectives) {
    if (!std::isfinite(x)) throw std::invalid_argument("archive points must be finite");
  }
  for (const auto& p : points_) {
    if (weakly_dominates(p.objectives, objectives)) return false;
  }
  std::erase_if(points_, [&](const ArchivePoint& p) {
    return weakly_dominates(objectives, p.objectives);
  });
  points_.push_back({std::vector<double>(objectives.begin(), objectives.end()), route_id});
  for (int i = 0; i < dim_; ++i) {
    ideal_[i] = points_.front().objectives[i];
    for (const auto& p : points_) ideal_[i] = std::min(ideal_[i], p.objectives[i]);
  }
  return true;
}

ParetoArchive ParetoArchive::merged(const ParetoArchive& other) const {
  ParetoArchive out = *this;
  for (const auto& p : other.points_) out.insert(p.objectives, p.route_id);
  return out;
}

std::vector<std::vector<double>> ParetoArchive::sorted_objectives() const {
  std::vector<std::vector<double>> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.objectives);
  std::sort(out.begin(), out.end());
  return out;
}

double hypervolume_2d_raw(std::span<const std::vector<double>> points,
                          std::span<const double> reference) {
  if (reference.size() != 2) throw DimMismatch("hypervolume_2d needs two objectives");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(points.size());
  for (const auto& p : points) {
    if (p.size() != 2) throw DimMismatch("hypervolume_2d needs two objectives");
    if (p[0] > reference[0] || p[1] > reference[1]) {
      throw ReferenceDominated("point (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) +
                               ") lies outside the reference box");
    }
    pts.emplace_back(p[0], p[1]);
  }
  std::sort(pts.begin(), pts.end());
  // Sweep in ascending first objective; each point adds the strip between
  // its second objective and the lowest second objective seen so far.
  double area = 0.0;
  double ceiling = reference[1];
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto [x, y] = pts[i];
    if (y >= ceiling) continue;
    area += (reference[0] - x) * (ceiling - y);
    ceiling = y;
  }
  return area;
}

double hypervolume_2d_raw(const ParetoArchive& archive, std::span<const double> reference) {
  std::vector<std::vector<double>> pts;
  for (const auto& p : archive.points()) pts.push_back(p.objectives);
  return hypervolume_2d_raw(pts, reference);
}

double hypervolume_2d(const ParetoArchive& archive, std::span<const double> reference) {
  const double raw = hypervolume_2d_raw(archive, reference);
  const double box = reference[0] * reference[1];
  if (!(box > 0.0)) throw std::invalid_argument("reference box must have positive volume");
  return raw / box;
}

std::optional<Preference> recovering_preference(const ParetoArchive& archive, size_t index,
                                                std::span<const double> ideal,
                                                const std::vector<Preference>& grid) {
  const auto& pts = archive.points();
  for (const auto& pref : grid) {
    const double mine = chebyshev_cost(pts[index].objectives, pref, ideal);
    bool best = true;
    for (const auto& p : pts) {
      if (chebyshev_cost(p.objectives, pref, ideal) < mine) {
        best = false;
        break;
      }
    }
    if (best) return pref;
  }
  return std::nullopt;
}

}  // namespace mgroute
