// Copyright 2026 The flprotect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLPROTECT_RNG_H_
#define FLPROTECT_RNG_H_

#include <cstdint>
#include <random>

namespace flprotect {

// Default root seed used by every command when --seed is omitted.
inline constexpr uint64_t kDefaultSeed = 20240613;

inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-trial seed derived from the root seed and the trial index. Trials get
// the same seed no matter which thread runs them.
inline uint64_t DeriveSeed(uint64_t root, uint64_t index) {
  return SplitMix64(root ^ SplitMix64(index + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits. Unlike
// std::uniform_real_distribution the result does not depend on the standard
// library implementation.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool Bernoulli(Rng& rng, double probability) {
  return UniformUnit(rng) < probability;
}

}  // namespace flprotect

#endif  // FLPROTECT_RNG_H_
