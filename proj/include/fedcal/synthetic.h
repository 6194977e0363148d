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
// The heteroscedastic regression benchmark with sparse outliers:
//
//   X ~ Uniform[1, 5]
//   Y | X ~ Pois(sin^2(X) + 0.1) + 0.03 X e1 + 25 * 1{U < 0.01} e2
//
// with e1, e2 standard normal and U uniform. Instead of fitted quantile
// regressors, OracleQuantile gives the exact conditional quantiles of Y | X.

#ifndef FEDCAL_SYNTHETIC_H_
#define FEDCAL_SYNTHETIC_H_

#include <cstdint>
#include <vector>

#include "absl/status/statusor.h"
#include "fedcal/random.h"

namespace fedcal {

struct SyntheticPoint {
  double x = 0.0;
  double y = 0.0;
  // The Poisson component of y, kept for ablations.
  double poisson_part = 0.0;
  bool outlier = false;
};

struct SyntheticOptions {
  // When false the 25 * 1{U < 0.01} e2 term is dropped.
  bool outliers = true;
};

std::vector<SyntheticPoint> SyntheticDataset(
    int64_t count, Rng& rng, const SyntheticOptions& options = {});

// P(Y <= y | X = x) under the generative model.
double SyntheticConditionalCdf(double x, double y,
                               const SyntheticOptions& options = {});

// Exact conditional quantile x -> F^{-1}(level | x), tabulated on a uniform
// x-grid over [1, 5] and linearly interpolated.
class OracleQuantile {
 public:
  static absl::StatusOr<OracleQuantile> Create(
      double level, const SyntheticOptions& options = {},
      int64_t grid_points = 801);

  double operator()(double x) const;
  double level() const { return level_; }

 private:
  OracleQuantile(double level, std::vector<double> values)
      : level_(level), values_(std::move(values)) {}

  double level_;
  std::vector<double> values_;
};

// Quantile of Y | X = x by bisection on the conditional c.d.f.
double SyntheticConditionalQuantile(double x, double level,
                                    const SyntheticOptions& options = {});

}  // namespace fedcal

#endif  // FEDCAL_SYNTHETIC_H_
