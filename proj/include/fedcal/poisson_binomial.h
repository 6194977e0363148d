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
// Poisson-binomial distributions and their distance to the binomial law
// with the same mean, which measures how much agent heterogeneity can cost
// in coverage.

#ifndef FEDCAL_POISSON_BINOMIAL_H_
#define FEDCAL_POISSON_BINOMIAL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"

namespace fedcal {

// PMF of the number of successes of independent Bernoulli(p_j) trials, by
// sequential convolution. Element i is P(sum = i).
absl::StatusOr<std::vector<double>> PoissonBinomialPmf(
    std::span<const double> p);

std::vector<double> BinomialPmf(int64_t m, double p);

// (1/2) * sum |a_i - b_i|, missing entries treated as 0.
double TotalVariation(std::span<const double> a, std::span<const double> b);

struct PoissonBinomialDiagnostic {
  double mean_p = 0.0;
  double exact_tv_to_binomial = 0.0;
  // The lower bound with its unspecified universal constant left out, i.e.
  // the true lower bound is C * ehm_lower for some absolute C > 0.
  double ehm_lower = 0.0;
  double ehm_upper = 0.0;
};

// Exact TV distance between PoisBin(p) and Bin(m, mean(p)), with Ehm's
// bounds. When mean(p) is 0 or 1 both laws are a point mass and the bounds
// are reported as 0.
absl::StatusOr<PoissonBinomialDiagnostic> DiagnosePoissonBinomial(
    std::span<const double> p);

}  // namespace fedcal

#endif  // FEDCAL_POISSON_BINOMIAL_H_
