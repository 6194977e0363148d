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
// Locally differentially private calibration: the exponential-mechanism
// quantile over a bin grid and FedCP2-QQ, which corrects the requested ranks
// so the private threshold keeps the 1 - alpha coverage guarantee.

#ifndef FEDCAL_PRIVACY_H_
#define FEDCAL_PRIVACY_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedcal/conformal.h"
#include "fedcal/coverage_table.h"
#include "fedcal/order_stats.h"
#include "fedcal/random.h"

namespace fedcal {

// Edges 0 = e_0 < e_1 < ... < e_B = S_max defining bins (e_{b-1}, e_b].
class BinGrid {
 public:
  // A single bin (0, 1].
  BinGrid() : edges_{0.0, 1.0} {}

  // B equal-width bins on (0, smax].
  static absl::StatusOr<BinGrid> Uniform(int64_t bins, double smax);
  static absl::StatusOr<BinGrid> FromEdges(std::vector<double> edges);

  int64_t bins() const { return static_cast<int64_t>(edges_.size()) - 1; }
  double smax() const { return edges_.back(); }
  const std::vector<double>& edges() const { return edges_; }
  double edge(int64_t b) const { return edges_[b]; }

  // The b in [1, B] with score in (e_{b-1}, e_b]. A score of exactly 0 goes
  // to the first bin; negative scores and scores above S_max are rejected.
  absl::StatusOr<int64_t> BinOf(double score) const;

 private:
  explicit BinGrid(std::vector<double> edges) : edges_(std::move(edges)) {}
  std::vector<double> edges_;
};

// 20 log-spaced values from 1e-3 to 0.5.
std::vector<double> DefaultGammaGrid();

struct DpConfig {
  double epsilon = 1.0;
  BinGrid grid;
  // Fixed gamma; when absent the best value of gamma_grid is searched.
  std::optional<double> gamma;
  std::vector<double> gamma_grid = DefaultGammaGrid();
  // Multiplies epsilon in the mechanism and in the rank correction, to
  // account for amplification by shuffling or secure aggregation performed
  // outside this library. 1 means no amplification.
  double amplification = 1.0;
};

// Normalized utilities u_b = w_b / Delta_q for b = 1..B (element b-1), where
// w_b = max(#{S_i < e_b} / q, #{S_i > e_b} / (1 - q)) on discretized scores.
// Defined for 0 < q <= 1; at q = 1 the first term vanishes.
absl::StatusOr<std::vector<double>> DpQuantileUtilities(
    std::span<const double> scores, double q, const BinGrid& grid);

// Output distribution of the mechanism: P(e_b) proportional to
// exp(-epsilon * u_b / 2). Element b-1 is the probability of edge e_b.
absl::StatusOr<std::vector<double>> DpQuantileDistribution(
    std::span<const double> scores, double q, double epsilon,
    const BinGrid& grid);

// One draw of the mechanism (Gumbel-max in log space). The result is always
// a grid edge. q < 1/2 is accepted, but the mechanism's accuracy guarantee
// used by FedCP2-QQ only covers q >= 1/2.
absl::StatusOr<double> DpQuantile(std::span<const double> scores, double q,
                                  double epsilon, const BinGrid& grid,
                                  Rng& rng);

// ceil((2 / epsilon) * log(B / (1 - (1 - gamma_alpha)^(1/m)))).
absl::StatusOr<int64_t> LCor(double epsilon, int64_t bins, int64_t m,
                             double gamma_alpha);

struct GammaChoice {
  double gamma = 0.0;
  double alpha_prime = 0.0;  // miscoverage for level (1-alpha)/(1-gamma alpha)
  QQIndex index;             // (l_gamma, k_gamma)
  int64_t l_cor = 0;
  double corrected_coverage = 0.0;  // M(l_gamma + l_cor, k_gamma)
};

// Evaluates every gamma of `gammas` and keeps the one with the smallest
// corrected coverage, preferring the smaller gamma on ties. Candidates with
// l_gamma + l_cor > n or an unreachable level are skipped.
absl::StatusOr<GammaChoice> ChooseGamma(CoverageTable& table, double alpha,
                                        double epsilon, int64_t bins,
                                        std::span<const double> gammas);

struct DpPlan {
  GammaChoice choice;
  double quantile_level = 0.5;  // max((l_gamma + l_cor) / n, 1/2)
  double effective_epsilon = 0.0;
};

absl::StatusOr<DpPlan> PlanFedCp2Qq(const TableKey& key, double alpha,
                                    const DpConfig& cfg,
                                    CoverageTable* table = nullptr);

// Random stream of agent `agent` for a calibration seeded with `seed`.
Rng AgentRng(uint64_t seed, int64_t agent);

// Server step: the k_gamma-th smallest private report.
absl::StatusOr<CalibrationResult> AggregateFedCp2Qq(
    std::span<const double> reports, const DpPlan& plan, double alpha,
    const DpConfig& cfg);

// Each agent draws once from the mechanism with its own stream.
absl::StatusOr<CalibrationResult> FedCp2QqCalibrate(
    const ScoreMatrix& scores, double alpha, const DpConfig& cfg, uint64_t seed,
    CoverageTable* table = nullptr);

}  // namespace fedcal

#endif  // FEDCAL_PRIVACY_H_
