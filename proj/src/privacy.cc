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
#include "fedcal/privacy.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedcal/log_prob.h"
#include "fedcal/status_macros.h"

namespace fedcal {
namespace {

absl::Status CheckEpsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "epsilon must be a positive finite number, got ", epsilon));
  }
  return absl::OkStatus();
}

absl::Status CheckAlpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("alpha must lie in (0, 1), got ", alpha));
  }
  return absl::OkStatus();
}

// Log weights -epsilon * u_b / 2 of the mechanism.
absl::StatusOr<std::vector<double>> LogWeights(std::span<const double> scores,
                                               double q, double epsilon,
                                               const BinGrid& grid) {
  FEDCAL_RETURN_IF_ERROR(CheckEpsilon(epsilon));
  FEDCAL_ASSIGN_OR_RETURN(std::vector<double> u,
                          DpQuantileUtilities(scores, q, grid));
  for (double& v : u) v *= -0.5 * epsilon;
  return u;
}

}  // namespace

absl::StatusOr<BinGrid> BinGrid::Uniform(int64_t bins, double smax) {
  if (bins < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("number of bins must be >= 1, got ", bins));
  }
  if (!(smax > 0.0) || !std::isfinite(smax)) {
    return absl::InvalidArgumentError(
        absl::StrCat("S_max must be positive and finite, got ", smax));
  }
  std::vector<double> edges(bins + 1);
  for (int64_t b = 0; b <= bins; ++b) {
    edges[b] = smax * static_cast<double>(b) / static_cast<double>(bins);
  }
  edges[bins] = smax;
  return FromEdges(std::move(edges));
}

absl::StatusOr<BinGrid> BinGrid::FromEdges(std::vector<double> edges) {
  if (edges.size() < 2) {
    return absl::InvalidArgumentError("a bin grid needs at least two edges");
  }
  if (edges[0] != 0.0) {
    return absl::InvalidArgumentError("the first bin edge must be 0");
  }
  for (size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1]) || !std::isfinite(edges[i])) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "bin edges must be finite and strictly increasing (edge %d)", i));
    }
  }
  return BinGrid(std::move(edges));
}

absl::StatusOr<int64_t> BinGrid::BinOf(double score) const {
  if (!(score >= 0.0) || score > smax()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "score %.17g outside [0, S_max = %.17g]; clip or rescale scores "
        "before the private mechanism",
        score, smax()));
  }
  auto it = std::lower_bound(edges_.begin() + 1, edges_.end(), score);
  return static_cast<int64_t>(it - edges_.begin());
}

std::vector<double> DefaultGammaGrid() {
  constexpr int kPoints = 20;
  const double lo = std::log(1e-3);
  const double hi = std::log(0.5);
  std::vector<double> grid(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * i / (kPoints - 1));
  }
  grid.front() = 1e-3;
  grid.back() = 0.5;
  return grid;
}

absl::StatusOr<std::vector<double>> DpQuantileUtilities(
    std::span<const double> scores, double q, const BinGrid& grid) {
  if (!(q > 0.0 && q <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("quantile level must lie in (0, 1], got ", q));
  }
  if (scores.empty()) {
    return absl::InvalidArgumentError("empty score sample");
  }
  const int64_t bins = grid.bins();
  std::vector<int64_t> counts(bins + 1, 0);
  for (double s : scores) {
    FEDCAL_ASSIGN_OR_RETURN(int64_t b, grid.BinOf(s));
    ++counts[b];
  }
  // w_b / Delta_q with the larger of 1/q and 1/(1-q) divided out, which keeps
  // the value finite at q = 1.
  const double below_factor = q >= 0.5 ? (1.0 - q) / q : 1.0;
  const double above_factor = q >= 0.5 ? 1.0 : q / (1.0 - q);
  std::vector<double> utility(bins);
  int64_t below = 0;
  int64_t above = static_cast<int64_t>(scores.size());
  for (int64_t b = 1; b <= bins; ++b) {
    above -= counts[b];
    utility[b - 1] = std::max(static_cast<double>(below) * below_factor,
                              static_cast<double>(above) * above_factor);
    below += counts[b];
  }
  return utility;
}

absl::StatusOr<std::vector<double>> DpQuantileDistribution(
    std::span<const double> scores, double q, double epsilon,
    const BinGrid& grid) {
  FEDCAL_ASSIGN_OR_RETURN(std::vector<double> logw,
                          LogWeights(scores, q, epsilon, grid));
  const double norm = internal::LogSumExp(logw);
  for (double& v : logw) v = std::exp(v - norm);
  return logw;
}

absl::StatusOr<double> DpQuantile(std::span<const double> scores, double q,
                                  double epsilon, const BinGrid& grid,
                                  Rng& rng) {
  FEDCAL_ASSIGN_OR_RETURN(std::vector<double> logw,
                          LogWeights(scores, q, epsilon, grid));
  int64_t best = 0;
  double best_key = -std::numeric_limits<double>::infinity();
  for (size_t b = 0; b < logw.size(); ++b) {
    const double key = logw[b] + Gumbel(rng);
    if (key > best_key) {
      best_key = key;
      best = static_cast<int64_t>(b);
    }
  }
  return grid.edge(best + 1);
}

absl::StatusOr<int64_t> LCor(double epsilon, int64_t bins, int64_t m,
                             double gamma_alpha) {
  FEDCAL_RETURN_IF_ERROR(CheckEpsilon(epsilon));
  if (bins < 1 || m < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("need B >= 1 and m >= 1, got B=", bins, " m=", m));
  }
  if (!(gamma_alpha > 0.0 && gamma_alpha < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("gamma * alpha must lie in (0, 1), got ", gamma_alpha));
  }
  // 1 - (1 - ga)^(1/m) without cancellation for small ga / m.
  const double tail =
      -std::expm1(std::log1p(-gamma_alpha) / static_cast<double>(m));
  const double value =
      2.0 / epsilon * (std::log(static_cast<double>(bins)) - std::log(tail));
  return std::max<int64_t>(CeilRank(value), 0);
}

absl::StatusOr<GammaChoice> ChooseGamma(CoverageTable& table, double alpha,
                                        double epsilon, int64_t bins,
                                        std::span<const double> gammas) {
  FEDCAL_RETURN_IF_ERROR(CheckAlpha(alpha));
  FEDCAL_RETURN_IF_ERROR(CheckEpsilon(epsilon));
  if (gammas.empty()) {
    return absl::InvalidArgumentError("empty gamma grid");
  }
  std::vector<double> sorted(gammas.begin(), gammas.end());
  std::sort(sorted.begin(), sorted.end());
  const TableKey& key = table.key();
  std::optional<GammaChoice> best;
  for (double gamma : sorted) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("gamma candidates must lie in (0, 1), got ", gamma));
    }
    GammaChoice c;
    c.gamma = gamma;
    c.alpha_prime = alpha * (1.0 - gamma) / (1.0 - gamma * alpha);
    auto sel = table.FindLkStar(c.alpha_prime);
    if (absl::IsFailedPrecondition(sel.status())) continue;
    if (!sel.ok()) return sel.status();
    c.index = sel->index;
    FEDCAL_ASSIGN_OR_RETURN(c.l_cor, LCor(epsilon, bins, key.m, gamma * alpha));
    if (c.index.l + c.l_cor > key.n) continue;
    FEDCAL_ASSIGN_OR_RETURN(c.corrected_coverage,
                            table.Entry({c.index.l + c.l_cor, c.index.k}));
    if (!best.has_value() ||
        c.corrected_coverage < best->corrected_coverage - kCoverageSlack) {
      best = c;
    }
  }
  if (!best.has_value()) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "infeasible: for every gamma the corrected rank l_gamma + l_cor "
        "exceeds n = %d; n is too small for epsilon = %g with B = %d bins",
        key.n, epsilon, bins));
  }
  return *best;
}

absl::StatusOr<DpPlan> PlanFedCp2Qq(const TableKey& key, double alpha,
                                    const DpConfig& cfg, CoverageTable* table) {
  FEDCAL_RETURN_IF_ERROR(CheckEpsilon(cfg.epsilon));
  if (!(cfg.amplification >= 1.0) || !std::isfinite(cfg.amplification)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "amplification factor must be >= 1, got ", cfg.amplification));
  }
  std::optional<CoverageTable> own;
  if (table == nullptr) {
    FEDCAL_ASSIGN_OR_RETURN(own, CoverageTable::Create(key));
    table = &*own;
  } else if (!(table->key() == key)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "coverage table is for m=%d n=%d but the data has m=%d n=%d",
        table->key().m, table->key().n, key.m, key.n));
  }
  DpPlan plan;
  plan.effective_epsilon = cfg.epsilon * cfg.amplification;
  std::vector<double> fixed;
  std::span<const double> gammas = cfg.gamma_grid;
  if (cfg.gamma.has_value()) {
    fixed.push_back(*cfg.gamma);
    gammas = fixed;
  }
  FEDCAL_ASSIGN_OR_RETURN(plan.choice,
                          ChooseGamma(*table, alpha, plan.effective_epsilon,
                                      cfg.grid.bins(), gammas));
  plan.quantile_level =
      std::max(static_cast<double>(plan.choice.index.l + plan.choice.l_cor) /
                   static_cast<double>(key.n),
               0.5);
  return plan;
}

Rng AgentRng(uint64_t seed, int64_t agent) {
  return MakeRng(seed, static_cast<uint64_t>(agent), /*b=*/1);
}

absl::StatusOr<CalibrationResult> AggregateFedCp2Qq(
    std::span<const double> reports, const DpPlan& plan, double alpha,
    const DpConfig& cfg) {
  CalibrationResult result;
  result.method = Method::kFedCp2Qq;
  FEDCAL_ASSIGN_OR_RETURN(result.q_hat,
                          OrderStatistic(reports, plan.choice.index.k));
  result.guaranteed_coverage = 1.0 - alpha;
  CalibrationParams& p = result.params;
  p.alpha = alpha;
  p.l = plan.choice.index.l;
  p.k = plan.choice.index.k;
  p.epsilon = cfg.epsilon;
  p.effective_epsilon = plan.effective_epsilon;
  p.bins = cfg.grid.bins();
  p.smax = cfg.grid.smax();
  p.gamma = plan.choice.gamma;
  p.l_cor = plan.choice.l_cor;
  p.quantile_level = plan.quantile_level;
  return result;
}

absl::StatusOr<CalibrationResult> FedCp2QqCalibrate(const ScoreMatrix& scores,
                                                    double alpha,
                                                    const DpConfig& cfg,
                                                    uint64_t seed,
                                                    CoverageTable* table) {
  FEDCAL_RETURN_IF_ERROR(ValidateMatrix(scores, /*require_balanced=*/true));
  const TableKey key{static_cast<int64_t>(scores.size()),
                     static_cast<int64_t>(scores[0].size())};
  FEDCAL_ASSIGN_OR_RETURN(DpPlan plan, PlanFedCp2Qq(key, alpha, cfg, table));
  std::vector<double> reports;
  reports.reserve(scores.size());
  for (size_t j = 0; j < scores.size(); ++j) {
    Rng rng = AgentRng(seed, static_cast<int64_t>(j));
    FEDCAL_ASSIGN_OR_RETURN(double r,
                            DpQuantile(scores[j], plan.quantile_level,
                                       plan.effective_epsilon, cfg.grid, rng));
    reports.push_back(r);
  }
  return AggregateFedCp2Qq(reports, plan, alpha, cfg);
}

}  // namespace fedcal
