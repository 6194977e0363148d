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
#include "fedcal/order_stats.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "absl/strings/str_cat.h"
#include "fedcal/status_macros.h"

namespace fedcal {

absl::Status ValidateSample(std::span<const double> sample, bool allow_empty) {
  if (sample.empty() && !allow_empty) {
    return absl::InvalidArgumentError("score sample is empty");
  }
  for (size_t i = 0; i < sample.size(); ++i) {
    if (!std::isfinite(sample[i])) {
      return absl::InvalidArgumentError(
          absl::StrCat("score at position ", i, " is not finite"));
    }
  }
  return absl::OkStatus();
}

absl::Status ValidateMatrix(const ScoreMatrix& scores, bool require_balanced) {
  if (scores.empty()) {
    return absl::InvalidArgumentError("score matrix has no agents");
  }
  for (size_t j = 0; j < scores.size(); ++j) {
    absl::Status s = ValidateSample(scores[j]);
    if (!s.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("agent ", j, ": ", s.message()));
    }
    if (require_balanced && scores[j].size() != scores[0].size()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "unbalanced score matrix: agent 0 holds ", scores[0].size(),
          " scores but agent ", j, " holds ", scores[j].size()));
    }
  }
  return absl::OkStatus();
}

namespace {

// Server-side reports may be +inf, so this skips the finiteness check.
ExtendedScore UncheckedOrderStatistic(std::span<const double> sample,
                                      int64_t k) {
  if (static_cast<uint64_t>(k) > sample.size()) return kInfiniteScore;
  std::vector<double> scratch(sample.begin(), sample.end());
  auto nth = scratch.begin() + (k - 1);
  std::nth_element(scratch.begin(), nth, scratch.end());
  return *nth;
}

}  // namespace

absl::StatusOr<ExtendedScore> OrderStatistic(std::span<const double> sample,
                                             int64_t k) {
  if (k < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("order statistic rank must be >= 1, got ", k));
  }
  FEDCAL_RETURN_IF_ERROR(ValidateSample(sample, /*allow_empty=*/true));
  return UncheckedOrderStatistic(sample, k);
}

absl::StatusOr<ExtendedScore> QuantileOfQuantiles(const ScoreMatrix& scores,
                                                  int64_t l, int64_t k) {
  if (l < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("local rank l must be >= 1, got ", l));
  }
  if (k < 1 || static_cast<uint64_t>(k) > scores.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "server rank k must lie in [1, ", scores.size(), "], got ", k));
  }
  std::vector<double> local(scores.size());
  for (size_t j = 0; j < scores.size(); ++j) {
    auto q = OrderStatistic(scores[j], l);
    if (!q.ok()) return q.status();
    local[j] = *q;
  }
  return UncheckedOrderStatistic(local, k);
}

int64_t CeilRank(double x) {
  return static_cast<int64_t>(std::ceil(x - 1e-9 * std::max(1.0, std::abs(x))));
}

int64_t ConformalRank(int64_t n, double alpha) {
  return CeilRank(static_cast<double>(n + 1) * (1.0 - alpha));
}

}  // namespace fedcal
