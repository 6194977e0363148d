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
// Order statistics and the quantile-of-quantiles estimator. Every function
// here is pure and safe to call concurrently.

#ifndef FEDCAL_ORDER_STATS_H_
#define FEDCAL_ORDER_STATS_H_

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace fedcal {

// A real score or +infinity, the value returned when a requested rank does
// not exist. +infinity compares greater than every finite score.
using ExtendedScore = double;

inline constexpr ExtendedScore kInfiniteScore =
    std::numeric_limits<double>::infinity();

// Nonconformity scores held by one agent.
using ScoreSample = std::vector<double>;

// One ScoreSample per agent.
using ScoreMatrix = std::vector<ScoreSample>;

// Rejects NaN and infinite entries. Empty samples are accepted only when
// `allow_empty` is set.
absl::Status ValidateSample(std::span<const double> sample,
                            bool allow_empty = false);

// Rejects an empty matrix, empty agents and non-finite entries. When
// `require_balanced` is set every agent must hold the same number of scores.
absl::Status ValidateMatrix(const ScoreMatrix& scores, bool require_balanced);

// Returns the k-th smallest element (1-based, duplicates counted with
// multiplicity) or +infinity when k exceeds the sample size. The input is
// not modified.
absl::StatusOr<ExtendedScore> OrderStatistic(std::span<const double> sample,
                                             int64_t k);

// The k-th smallest of the per-agent l-th smallest scores. Agents with fewer
// than l scores contribute +infinity.
absl::StatusOr<ExtendedScore> QuantileOfQuantiles(const ScoreMatrix& scores,
                                                  int64_t l, int64_t k);

// ceil(x) robust to representation error: values within 1e-9 above an
// integer round down to it, e.g. (19 + 1) * 0.9 -> 18.
int64_t CeilRank(double x);

// The split-conformal rank ceil((n + 1)(1 - alpha)).
int64_t ConformalRank(int64_t n, double alpha);

}  // namespace fedcal

#endif  // FEDCAL_ORDER_STATS_H_
