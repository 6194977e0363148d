// Copyright 2026 The fedcal Authors
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
//
// Reproducible random streams. Every random quantity in the library is drawn
// from a generator seeded by DeriveSeed(master, ...) so results do not depend
// on evaluation order or threading.

#ifndef FEDCAL_RANDOM_H_
#define FEDCAL_RANDOM_H_

#include <cstdint>
#include <random>

namespace fedcal {

using Rng = std::mt19937_64;

// Counter-based substream seed: a splitmix64 chain over (master, a, b).
uint64_t DeriveSeed(uint64_t master, uint64_t a, uint64_t b = 0);

inline Rng MakeRng(uint64_t master, uint64_t a, uint64_t b = 0) {
  return Rng(DeriveSeed(master, a, b));
}

// Uniform draw from the open interval (0, 1).
double UniformOpen(Rng& rng);

// Standard Gumbel variate.
double Gumbel(Rng& rng);

}  // namespace fedcal

#endif  // FEDCAL_RANDOM_H_
