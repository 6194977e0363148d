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
#include "fedcal/conformal.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedcal/status_macros.h"

namespace fedcal {
namespace {

absl::Status CheckAlpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("alpha must lie in (0, 1), got ", alpha));
  }
  return absl::OkStatus();
}

bool AllEqual(std::span<const int64_t> values) {
  return std::adjacent_find(values.begin(), values.end(),
                            std::not_equal_to<>()) == values.end();
}

}  // namespace

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kCentralized:
      return "centralized";
    case Method::kFedCpQq:
      return "fedcp-qq";
    case Method::kFedCpAvg:
      return "fedcp-avg";
    case Method::kFedCp2Qq:
      return "fedcp2-qq";
  }
  return "unknown";
}

absl::StatusOr<Method> ParseMethod(std::string_view name) {
  std::string normalized(name);
  std::replace(normalized.begin(), normalized.end(), '_', '-');
  for (Method m : {Method::kCentralized, Method::kFedCpQq, Method::kFedCpAvg,
                   Method::kFedCp2Qq}) {
    if (normalized == MethodName(m)) return m;
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown method '", std::string(name),
      "'; expected centralized, fedcp-qq, fedcp-avg or fedcp2-qq"));
}

ScoreFunction ScoreFunction::AbsoluteResidual(Predictor point) {
  Predictor copy = point;
  return ScoreFunction(ScoreKind::kAbsoluteResidual, std::move(point),
                       std::move(copy));
}

ScoreFunction ScoreFunction::Cqr(Predictor lower, Predictor upper) {
  return ScoreFunction(ScoreKind::kCqr, std::move(lower), std::move(upper));
}

double ScoreFunction::Score(Features x, double y) const {
  if (kind_ == ScoreKind::kAbsoluteResidual) return std::abs(y - lower_(x));
  return std::max(lower_(x) - y, y - upper_(x));
}

std::pair<double, double> ScoreFunction::Band(Features x) const {
  if (kind_ == ScoreKind::kAbsoluteResidual) {
    const double f = lower_(x);
    return {f, f};
  }
  return {lower_(x), upper_(x)};
}

std::vector<int64_t> AgentSizes(const ScoreMatrix& scores) {
  std::vector<int64_t> sizes;
  sizes.reserve(scores.size());
  for (const ScoreSample& s : scores) {
    sizes.push_back(static_cast<int64_t>(s.size()));
  }
  return sizes;
}

absl::StatusOr<CalibrationResult> SplitCpCalibrate(
    std::span<const double> scores, double alpha) {
  FEDCAL_RETURN_IF_ERROR(CheckAlpha(alpha));
  FEDCAL_RETURN_IF_ERROR(ValidateSample(scores));
  const int64_t n = static_cast<int64_t>(scores.size());
  const int64_t rank = ConformalRank(n, alpha);
  CalibrationResult result;
  result.method = Method::kCentralized;
  FEDCAL_ASSIGN_OR_RETURN(result.q_hat, OrderStatistic(scores, rank));
  result.guaranteed_coverage = 1.0 - alpha;
  result.params.alpha = alpha;
  result.params.l = rank;
  result.params.k = 1;
  return result;
}

absl::StatusOr<QqPlan> PlanFedCpQq(std::span<const int64_t> sizes, double alpha,
                                   CoverageTable* table) {
  FEDCAL_RETURN_IF_ERROR(CheckAlpha(alpha));
  if (sizes.empty()) {
    return absl::InvalidArgumentError("need at least one agent");
  }
  const int64_t m = static_cast<int64_t>(sizes.size());
  QqPlan plan;
  if (!AllEqual(sizes)) {
    if (table != nullptr) {
      return absl::InvalidArgumentError(
          "a coverage table only applies to agents of equal size");
    }
    FEDCAL_ASSIGN_OR_RETURN(UnbalancedSelection sel,
                            FindKUnbalanced(sizes, alpha));
    plan.local_ranks = std::move(sel.local_ranks);
    plan.k = sel.k;
    plan.coverage = sel.coverage;
    return plan;
  }
  const TableKey key{m, sizes[0]};
  LkSelection sel;
  if (table != nullptr) {
    if (!(table->key() == key)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "coverage table is for m=%d n=%d but the data has m=%d n=%d",
          table->key().m, table->key().n, key.m, key.n));
    }
    FEDCAL_ASSIGN_OR_RETURN(sel, table->Select(alpha));
  } else {
    FEDCAL_ASSIGN_OR_RETURN(sel, FindLkStar(key, alpha));
  }
  plan.local_ranks.assign(m, sel.index.l);
  plan.k = sel.index.k;
  plan.coverage = sel.coverage;
  return plan;
}

absl::StatusOr<CalibrationResult> AggregateFedCpQq(
    std::span<const double> reports, const QqPlan& plan, double alpha) {
  if (reports.size() != plan.local_ranks.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected ", plan.local_ranks.size(), " reports, got ",
                     reports.size()));
  }
  CalibrationResult result;
  result.method = Method::kFedCpQq;
  FEDCAL_ASSIGN_OR_RETURN(result.q_hat, OrderStatistic(reports, plan.k));
  result.guaranteed_coverage = plan.coverage;
  result.params.alpha = alpha;
  result.params.local_ranks = plan.local_ranks;
  result.params.l = AllEqual(plan.local_ranks) ? plan.local_ranks[0] : 0;
  result.params.k = plan.k;
  return result;
}

absl::StatusOr<CalibrationResult> FedCpQqCalibrate(const ScoreMatrix& scores,
                                                   double alpha,
                                                   CoverageTable* table) {
  FEDCAL_RETURN_IF_ERROR(ValidateMatrix(scores, /*require_balanced=*/false));
  const std::vector<int64_t> sizes = AgentSizes(scores);
  FEDCAL_ASSIGN_OR_RETURN(QqPlan plan, PlanFedCpQq(sizes, alpha, table));
  std::vector<double> reports;
  reports.reserve(scores.size());
  for (size_t j = 0; j < scores.size(); ++j) {
    FEDCAL_ASSIGN_OR_RETURN(double r,
                            OrderStatistic(scores[j], plan.local_ranks[j]));
    reports.push_back(r);
  }
  return AggregateFedCpQq(reports, plan, alpha);
}

absl::StatusOr<std::vector<int64_t>> PlanFedCpAvg(
    std::span<const int64_t> sizes, double alpha) {
  FEDCAL_RETURN_IF_ERROR(CheckAlpha(alpha));
  if (sizes.empty()) {
    return absl::InvalidArgumentError("need at least one agent");
  }
  std::vector<int64_t> ranks;
  ranks.reserve(sizes.size());
  for (size_t j = 0; j < sizes.size(); ++j) {
    const int64_t rank = ConformalRank(sizes[j], alpha);
    if (rank > sizes[j]) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "fedcp-avg needs the local rank ceil((n+1)(1-alpha)) = %d to be at "
          "most n = %d (agent %d); the averaged quantile is undefined for so "
          "few scores, increase n or alpha",
          rank, sizes[j], j));
    }
    ranks.push_back(rank);
  }
  return ranks;
}

absl::StatusOr<CalibrationResult> AggregateFedCpAvg(
    std::span<const double> reports, std::span<const int64_t> local_ranks,
    double alpha) {
  if (reports.empty() || reports.size() != local_ranks.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "expected ", local_ranks.size(), " reports, got ", reports.size()));
  }
  double sum = 0.0;
  for (double r : reports) sum += r;
  CalibrationResult result;
  result.method = Method::kFedCpAvg;
  result.q_hat = sum / static_cast<double>(reports.size());
  result.params.alpha = alpha;
  result.params.local_ranks.assign(local_ranks.begin(), local_ranks.end());
  result.params.l = AllEqual(local_ranks) ? local_ranks[0] : 0;
  return result;
}

absl::StatusOr<CalibrationResult> FedCpAvgCalibrate(const ScoreMatrix& scores,
                                                    double alpha) {
  FEDCAL_RETURN_IF_ERROR(ValidateMatrix(scores, /*require_balanced=*/false));
  const std::vector<int64_t> sizes = AgentSizes(scores);
  FEDCAL_ASSIGN_OR_RETURN(std::vector<int64_t> ranks,
                          PlanFedCpAvg(sizes, alpha));
  std::vector<double> reports;
  reports.reserve(scores.size());
  for (size_t j = 0; j < scores.size(); ++j) {
    FEDCAL_ASSIGN_OR_RETURN(double r, OrderStatistic(scores[j], ranks[j]));
    reports.push_back(r);
  }
  return AggregateFedCpAvg(reports, ranks, alpha);
}

absl::StatusOr<PredictionInterval> PredictInterval(
    Features x, const CalibrationResult& result, const ScoreFunction& sf) {
  if (result.score_kind.has_value() && *result.score_kind != sf.kind()) {
    return absl::InvalidArgumentError(
        "score function kind differs from the one used for calibration");
  }
  if (std::isnan(result.q_hat)) {
    return absl::InvalidArgumentError("calibration threshold is NaN");
  }
  if (result.q_hat == kInfiniteScore) {
    return PredictionInterval{-kInfiniteScore, kInfiniteScore};
  }
  const auto [lo, hi] = sf.Band(x);
  PredictionInterval out{lo - result.q_hat, hi + result.q_hat};
  if (out.lower > out.upper) {
    // A negative CQR threshold can cross the band; the set is then empty
    // and is represented by a degenerate interval at the band's midpoint.
    const double mid = 0.5 * (lo + hi);
    out = {mid, mid};
  }
  return out;
}

absl::StatusOr<Metrics> Evaluate(std::span<const PredictionInterval> intervals,
                                 std::span<const double> y_test) {
  if (y_test.empty()) {
    return absl::InvalidArgumentError("empty test set");
  }
  if (intervals.size() != y_test.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        intervals.size(), " intervals but ", y_test.size(), " test responses"));
  }
  Metrics metrics;
  int64_t covered = 0;
  int64_t finite = 0;
  double length_sum = 0.0;
  for (size_t i = 0; i < y_test.size(); ++i) {
    const PredictionInterval& iv = intervals[i];
    if (iv.lower <= y_test[i] && y_test[i] <= iv.upper) ++covered;
    const double length = iv.upper - iv.lower;
    if (std::isfinite(length)) {
      length_sum += length;
      ++finite;
    } else {
      ++metrics.infinite_count;
    }
  }
  metrics.coverage =
      static_cast<double>(covered) / static_cast<double>(y_test.size());
  metrics.mean_length =
      finite > 0 ? length_sum / static_cast<double>(finite) : kInfiniteScore;
  return metrics;
}

}  // namespace fedcal
