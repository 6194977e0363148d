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
#include "fedcal/poisson_binomial.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"
#include "fedcal/log_prob.h"
#include "fedcal/status_macros.h"

namespace fedcal {

absl::StatusOr<std::vector<double>> PoissonBinomialPmf(
    std::span<const double> p) {
  if (p.empty()) {
    return absl::InvalidArgumentError("need at least one probability");
  }
  std::vector<double> pmf{1.0};
  pmf.reserve(p.size() + 1);
  for (double pj : p) {
    if (!(pj >= 0.0 && pj <= 1.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("probabilities must lie in [0, 1], got ", pj));
    }
    pmf.push_back(0.0);
    for (size_t i = pmf.size() - 1; i > 0; --i) {
      pmf[i] = pmf[i] * (1.0 - pj) + pmf[i - 1] * pj;
    }
    pmf[0] *= 1.0 - pj;
  }
  return pmf;
}

std::vector<double> BinomialPmf(int64_t m, double p) {
  std::vector<double> pmf(m + 1, 0.0);
  if (p <= 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  if (p >= 1.0) {
    pmf[m] = 1.0;
    return pmf;
  }
  const long double log_p = std::log(static_cast<long double>(p));
  const long double log_q = std::log1p(-static_cast<long double>(p));
  for (int64_t i = 0; i <= m; ++i) {
    pmf[i] = std::exp(internal::LogBinomialPmf(m, i, log_p, log_q));
  }
  return pmf;
}

double TotalVariation(std::span<const double> a, std::span<const double> b) {
  const size_t size = std::max(a.size(), b.size());
  double sum = 0.0;
  for (size_t i = 0; i < size; ++i) {
    const double x = i < a.size() ? a[i] : 0.0;
    const double y = i < b.size() ? b[i] : 0.0;
    sum += std::abs(x - y);
  }
  return 0.5 * sum;
}

absl::StatusOr<PoissonBinomialDiagnostic> DiagnosePoissonBinomial(
    std::span<const double> p) {
  FEDCAL_ASSIGN_OR_RETURN(std::vector<double> pmf, PoissonBinomialPmf(p));
  const int64_t m = static_cast<int64_t>(p.size());
  double sum_p = 0.0;
  double sum_var = 0.0;
  for (double pj : p) {
    sum_p += pj;
    sum_var += pj * (1.0 - pj);
  }
  PoissonBinomialDiagnostic out;
  out.mean_p = sum_p / static_cast<double>(m);
  out.exact_tv_to_binomial = TotalVariation(pmf, BinomialPmf(m, out.mean_p));
  const double pbar = out.mean_p;
  if (pbar <= 0.0 || pbar >= 1.0) return out;
  const double spread =
      1.0 - std::pow(pbar, m + 1) - std::pow(1.0 - pbar, m + 1);
  // Variance deficit relative to the binomial; clamp rounding below zero.
  const double deficit = std::max(
      0.0, 1.0 - sum_var / (static_cast<double>(m) * pbar * (1.0 - pbar)));
  out.ehm_lower = spread * deficit;
  out.ehm_upper =
      static_cast<double>(m) / static_cast<double>(m + 1) * spread * deficit;
  return out;
}

}  // namespace fedcal
