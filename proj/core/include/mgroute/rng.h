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

#ifndef MGROUTE_RNG_H_
#define MGROUTE_RNG_H_

#include <cstdint>
#include <initializer_list>

namespace mgroute {

// SplitMix64 finaliser.
constexpr uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a stream key from a seed and an ordered list of integer
// coordinates (pair index, edge index, epoch, ...).
constexpr uint64_t derive_key(uint64_t seed, std::initializer_list<uint64_t> path) {
  uint64_t k = mix64(seed);
  for (uint64_t p : path) k = mix64(k ^ mix64(p + 0x632be59bd9b4e019ULL));
  return k;
}

// Counter-based generator: the n-th draw of a stream is mix64(key + n), so any
// value is addressable without replaying earlier draws. Output depends only
// on integer arithmetic and is identical across platforms.
class CounterRng {
 public:
  explicit constexpr CounterRng(uint64_t key) : key_(key) {}
  CounterRng(uint64_t seed, std::initializer_list<uint64_t> path)
      : key_(derive_key(seed, path)) {}

  uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }
  uint64_t at(uint64_t n) const { return mix64(key_ ^ mix64(n)); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), rejection-free multiply-shift.
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  uint64_t key() const { return key_; }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace mgroute

#endif  // MGROUTE_RNG_H_
