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
#include "fedcal/random.h"

#include <cmath>

namespace fedcal {
namespace {

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t DeriveSeed(uint64_t master, uint64_t a, uint64_t b) {
  uint64_t h = SplitMix64(master);
  h = SplitMix64(h ^ a);
  return SplitMix64(h ^ (b * 0xd1342543de82ef95ULL + 1));
}

double UniformOpen(Rng& rng) {
  // 53 random bits, shifted by half a step so 0 and 1 never occur.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double Gumbel(Rng& rng) { return -std::log(-std::log(UniformOpen(rng))); }

}  // namespace fedcal
