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
#include "fedcal/synthetic.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "absl/strings/str_cat.h"

namespace fedcal {
namespace {

constexpr double kXLow = 1.0;
constexpr double kXHigh = 5.0;
constexpr double kOutlierRate = 0.01;
constexpr double kOutlierScale = 25.0;
constexpr double kNoiseSlope = 0.03;

double Lambda(double x) {
  const double s = std::sin(x);
  return s * s + 0.1;
}

double NormalCdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

std::vector<SyntheticPoint> SyntheticDataset(int64_t count, Rng& rng,
                                             const SyntheticOptions& options) {
  std::vector<SyntheticPoint> out;
  out.reserve(std::max<int64_t>(count, 0));
  std::uniform_real_distribution<double> ux(kXLow, kXHigh);
  std::normal_distribution<double> normal;
  for (int64_t i = 0; i < count; ++i) {
    SyntheticPoint p;
    p.x = ux(rng);
    std::poisson_distribution<int> pois(Lambda(p.x));
    p.poisson_part = pois(rng);
    p.y = p.poisson_part + kNoiseSlope * p.x * normal(rng);
    // Drawn unconditionally so the other components do not depend on the
    // ablation flag.
    const double u = UniformOpen(rng);
    const double e2 = normal(rng);
    p.outlier = options.outliers && u < kOutlierRate;
    if (p.outlier) p.y += kOutlierScale * e2;
    out.push_back(p);
  }
  return out;
}

double SyntheticConditionalCdf(double x, double y,
                               const SyntheticOptions& options) {
  const double lambda = Lambda(x);
  const double sd = kNoiseSlope * x;
  const double sd_outlier = std::sqrt(sd * sd + kOutlierScale * kOutlierScale);
  const double w_out = options.outliers ? kOutlierRate : 0.0;
  double cdf = 0.0;
  double pmf = std::exp(-lambda);
  // lambda <= 1.1, so 40 terms leave a tail far below double precision.
  for (int k = 0; k < 40; ++k) {
    if (k > 0) pmf *= lambda / k;
    cdf += pmf * ((1.0 - w_out) * NormalCdf((y - k) / sd) +
                  w_out * NormalCdf((y - k) / sd_outlier));
  }
  return std::clamp(cdf, 0.0, 1.0);
}

double SyntheticConditionalQuantile(double x, double level,
                                    const SyntheticOptions& options) {
  double lo = -500.0;
  double hi = 500.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (SyntheticConditionalCdf(x, mid, options) < level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

absl::StatusOr<OracleQuantile> OracleQuantile::Create(
    double level, const SyntheticOptions& options, int64_t grid_points) {
  if (!(level > 0.0 && level < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("quantile level must lie in (0, 1), got ", level));
  }
  if (grid_points < 2) {
    return absl::InvalidArgumentError("need at least two grid points");
  }
  std::vector<double> values(grid_points);
  for (int64_t i = 0; i < grid_points; ++i) {
    const double x = kXLow + (kXHigh - kXLow) * static_cast<double>(i) /
                                 static_cast<double>(grid_points - 1);
    values[i] = SyntheticConditionalQuantile(x, level, options);
  }
  return OracleQuantile(level, std::move(values));
}

double OracleQuantile::operator()(double x) const {
  const double pos = (std::clamp(x, kXLow, kXHigh) - kXLow) / (kXHigh - kXLow) *
                     static_cast<double>(values_.size() - 1);
  const size_t i = std::min(static_cast<size_t>(pos), values_.size() - 2);
  const double frac = pos - static_cast<double>(i);
  return values_[i] + frac * (values_[i + 1] - values_[i]);
}

}  // namespace fedcal
