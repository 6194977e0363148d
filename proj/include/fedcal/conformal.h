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
// Score functions, prediction intervals and the non-private calibrators:
// centralized split conformal, FedCP-QQ and the FedCP-Avg baseline.
//
// The federated calibrators are split into a server plan (which rank each
// agent reports), the agents' local step (an order statistic) and a server
// aggregation, so the protocol simulator can run the very same code.

#ifndef FEDCAL_CONFORMAL_H_
#define FEDCAL_CONFORMAL_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedcal/coverage_table.h"
#include "fedcal/order_stats.h"

namespace fedcal {

enum class Method { kCentralized, kFedCpQq, kFedCpAvg, kFedCp2Qq };

// "centralized", "fedcp-qq", "fedcp-avg", "fedcp2-qq".
std::string_view MethodName(Method method);

// Accepts the names above, with '_' allowed in place of '-'.
absl::StatusOr<Method> ParseMethod(std::string_view name);

enum class ScoreKind { kAbsoluteResidual, kCqr };

using Features = std::span<const double>;
using Predictor = std::function<double(Features)>;

class ScoreFunction {
 public:
  // s(x, y) = |y - f(x)|.
  static ScoreFunction AbsoluteResidual(Predictor point);

  // s(x, y) = max(lo(x) - y, y - hi(x)). May be negative.
  static ScoreFunction Cqr(Predictor lower, Predictor upper);

  ScoreKind kind() const { return kind_; }
  double Score(Features x, double y) const;

  // The interval [lo(x), hi(x)] that a threshold q widens to [lo-q, hi+q].
  // For the absolute residual lo = hi = f(x).
  std::pair<double, double> Band(Features x) const;

 private:
  ScoreFunction(ScoreKind kind, Predictor lower, Predictor upper)
      : kind_(kind), lower_(std::move(lower)), upper_(std::move(upper)) {}

  ScoreKind kind_;
  Predictor lower_;
  Predictor upper_;
};

struct CalibrationParams {
  double alpha = 0.0;
  // Quantile-of-quantiles ranks. local_ranks has one entry per agent; it is
  // constant (equal to l) for balanced data.
  int64_t l = 0;
  int64_t k = 0;
  std::vector<int64_t> local_ranks;
  // Private variant only.
  double epsilon = 0.0;
  double effective_epsilon = 0.0;
  int64_t bins = 0;
  double smax = 0.0;
  double gamma = 0.0;
  int64_t l_cor = 0;
  double quantile_level = 0.0;
};

struct CalibrationResult {
  ExtendedScore q_hat = kInfiniteScore;
  Method method = Method::kCentralized;
  // Absent for FedCP-Avg, which has no coverage guarantee.
  std::optional<double> guaranteed_coverage;
  CalibrationParams params;
  // When set, PredictInterval refuses score functions of another kind.
  std::optional<ScoreKind> score_kind;
};

struct PredictionInterval {
  double lower = 0.0;
  double upper = 0.0;
};

struct Metrics {
  double coverage = 0.0;
  // Mean of upper - lower over the finite intervals; +infinity when every
  // interval is infinite.
  double mean_length = 0.0;
  int64_t infinite_count = 0;
};

std::vector<int64_t> AgentSizes(const ScoreMatrix& scores);

// q_hat = the ceil((n+1)(1-alpha))-th smallest score, +infinity if that rank
// exceeds n.
absl::StatusOr<CalibrationResult> SplitCpCalibrate(
    std::span<const double> scores, double alpha);

struct QqPlan {
  std::vector<int64_t> local_ranks;
  int64_t k = 1;
  double coverage = 0.0;
};

// Chooses the ranks: (l*, k*) from the coverage table for equal sizes, fixed
// local ranks and the smallest feasible k otherwise. `table` is optional and
// must match (m, n) when given; it is only used for equal sizes.
absl::StatusOr<QqPlan> PlanFedCpQq(std::span<const int64_t> sizes, double alpha,
                                   CoverageTable* table = nullptr);

// Server step: the k-th smallest of the agents' reports.
absl::StatusOr<CalibrationResult> AggregateFedCpQq(
    std::span<const double> reports, const QqPlan& plan, double alpha);

absl::StatusOr<CalibrationResult> FedCpQqCalibrate(
    const ScoreMatrix& scores, double alpha, CoverageTable* table = nullptr);

// Local ranks ceil((n_j+1)(1-alpha)) of the averaging baseline. Fails when a
// rank exceeds the agent's sample size, because the local quantile the
// baseline averages does not exist then.
absl::StatusOr<std::vector<int64_t>> PlanFedCpAvg(
    std::span<const int64_t> sizes, double alpha);

absl::StatusOr<CalibrationResult> AggregateFedCpAvg(
    std::span<const double> reports, std::span<const int64_t> local_ranks,
    double alpha);

absl::StatusOr<CalibrationResult> FedCpAvgCalibrate(const ScoreMatrix& scores,
                                                    double alpha);

// [lo(x) - q_hat, hi(x) + q_hat]; the whole line when q_hat is infinite.
absl::StatusOr<PredictionInterval> PredictInterval(
    Features x, const CalibrationResult& result, const ScoreFunction& sf);

// Coverage uses the closed interval.
absl::StatusOr<Metrics> Evaluate(std::span<const PredictionInterval> intervals,
                                 std::span<const double> y_test);

}  // namespace fedcal

#endif  // FEDCAL_CONFORMAL_H_
