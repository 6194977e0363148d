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
// Monte-Carlo experiments: score distributions, per-agent heterogeneity,
// repeated sample -> calibrate -> evaluate loops, conditional coverage, the
// heterogeneity TV bound and the synthetic CQR benchmark.
//
// Every replication r draws from streams derived from (seed, r), so results
// are reproducible and independent of evaluation order.

#ifndef FEDCAL_SIMULATION_H_
#define FEDCAL_SIMULATION_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedcal/conformal.h"
#include "fedcal/coverage_table.h"
#include "fedcal/federation.h"
#include "fedcal/privacy.h"
#include "fedcal/random.h"

namespace fedcal {

class ScoreDistribution {
 public:
  using Sampler = std::function<double(Rng&)>;
  using Cdf = std::function<double(double)>;

  // Uniform on (0, 1).
  static ScoreDistribution Uniform();
  static ScoreDistribution Exponential(double rate = 1.0);
  // |Z| with Z drawn from 0.99 N(0, 1) + 0.01 N(0, 25^2): absolute
  // residuals with sparse large outliers.
  static ScoreDistribution Contaminated();
  // Caller-supplied sampler; conditional experiments need a c.d.f.
  static ScoreDistribution Custom(std::string name, Sampler sampler,
                                  std::optional<Cdf> cdf = std::nullopt);

  const std::string& name() const { return name_; }
  double Sample(Rng& rng) const { return sampler_(rng); }
  bool has_cdf() const { return cdf_.has_value(); }
  // Requires has_cdf().
  double CdfAt(double s) const { return (*cdf_)(s); }

 private:
  ScoreDistribution(std::string name, Sampler sampler, std::optional<Cdf> cdf)
      : name_(std::move(name)),
        sampler_(std::move(sampler)),
        cdf_(std::move(cdf)) {}

  std::string name_;
  Sampler sampler_;
  std::optional<Cdf> cdf_;
};

// s -> location + scale * s.
struct AffineShift {
  double location = 0.0;
  double scale = 1.0;
};

// Agent j's scores are agents[j] applied to the base distribution; the test
// score uses `test`. An empty `agents` means every agent is unshifted.
struct HeterogeneityModel {
  std::vector<AffineShift> agents;
  AffineShift test;

  // Agent j shifted by max_shift * j / (m - 1).
  static HeterogeneityModel LinearLocation(int64_t m, double max_shift);

  AffineShift ForAgent(int64_t j) const;
};

absl::Status ValidateHeterogeneity(const HeterogeneityModel& model, int64_t m);

struct ExperimentConfig {
  FederationSpec spec;
  Method method = Method::kFedCpQq;
  ScoreDistribution distribution = ScoreDistribution::Uniform();
  HeterogeneityModel heterogeneity;
  int64_t replications = 1;
  // Test scores per replication. 0 evaluates the coverage exactly through
  // the test distribution's c.d.f.
  int64_t test_size = 0;
  std::optional<DpConfig> dp;
};

struct ReplicationRow {
  Method method = Method::kFedCpQq;
  double coverage = 0.0;
  // Length 2 * q_hat of the symmetric interval built from the threshold.
  double mean_length = 0.0;
  uint64_t seed = 0;
  double q_hat = 0.0;
  int64_t uplinks = 0;
};

struct ExperimentSummary {
  double mean_coverage = 0.0;
  double coverage_se = 0.0;
  // Mean over replications with a finite threshold.
  double mean_length = 0.0;
  int64_t infinite_count = 0;
  std::vector<ReplicationRow> rows;
};

// Seed of replication r of an experiment seeded with `seed`.
uint64_t ReplicationSeed(uint64_t seed, int64_t r);

// Calibration scores of replication r: agent j's sample is drawn from the
// stream (rep_seed, j).
absl::StatusOr<ScoreMatrix> SampleScores(const ExperimentConfig& cfg,
                                         uint64_t rep_seed);

// Calibrates with cfg.method on scores drawn for `rep_seed`. Federated
// methods run through RunOneShot; `uplinks` receives the transcript size.
absl::StatusOr<CalibrationResult> CalibrateReplication(
    const ExperimentConfig& cfg, const ScoreMatrix& scores, uint64_t rep_seed,
    CoverageTable* table, int64_t* uplinks = nullptr);

absl::StatusOr<ExperimentSummary> CoverageExperiment(
    const ExperimentConfig& cfg);

struct ConditionalSummary {
  // alpha_P = 1 - F(q_hat) for each replication.
  std::vector<double> miscoverage;
  double mean = 0.0;
  double se = 0.0;

  // Fraction of replications with alpha_P <= bound.
  double FractionAtMost(double bound) const;
  // Empirical level-quantile of alpha_P.
  double Quantile(double level) const;
};

// Per-replication conditional miscoverage. With `index` set, the threshold
// is the quantile of quantiles at that fixed (l, k) instead of the method's
// own choice. Needs a distribution with a c.d.f.
absl::StatusOr<ConditionalSummary> ConditionalCoverageExperiment(
    const ExperimentConfig& cfg, std::optional<QQIndex> index = std::nullopt);

// E_S[ TV( PoisBin(p_1(S)..p_m(S)), Bin(m, p(S)) ) ] with
// p_j(s) = P(agent j's l-th smallest score <= s), p(s) the same for the test
// distribution, and S drawn from the test distribution; averaged over
// `samples` draws. This bounds the coverage lost to heterogeneity when the
// auxiliary i.i.d. scores are copies of the test score.
absl::StatusOr<double> HeterogeneityTvBound(const ScoreDistribution& base,
                                            const HeterogeneityModel& model,
                                            int64_t m, int64_t n, int64_t l,
                                            int64_t samples, uint64_t seed);

struct SyntheticRow {
  uint64_t seed = 0;
  Metrics centralized;
  Metrics fedcp_qq;
  Metrics fedcp_avg;
};

// The CQR benchmark on the synthetic regression model with oracle
// conditional quantiles standing in for fitted quantile regressors. Each
// replication draws m * n calibration points (agent j gets the j-th block
// of n) and `test_size` test points.
absl::StatusOr<std::vector<SyntheticRow>> SyntheticCqrExperiment(
    int64_t m, int64_t n, double alpha, int64_t replications, int64_t test_size,
    uint64_t seed);

}  // namespace fedcal

#endif  // FEDCAL_SIMULATION_H_
