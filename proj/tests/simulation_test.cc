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
#include "fedcal/simulation.h"

#include <cmath>
#include <set>
#include <vector>

#include "fedcal/synthetic.h"
#include "gtest/gtest.h"

namespace fedcal {
namespace {

ExperimentConfig Config(Method method, int64_t m, int64_t n, int64_t reps) {
  ExperimentConfig cfg;
  cfg.spec = {m, {n}, 0.1, 2024};
  cfg.method = method;
  cfg.replications = reps;
  return cfg;
}

TEST(SeedTest, ReplicationSeedsAreDistinctAndStable) {
  std::set<uint64_t> seen;
  for (int r = 0; r < 1000; ++r) seen.insert(ReplicationSeed(5, r));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(ReplicationSeed(5, 3), ReplicationSeed(5, 3));
  EXPECT_NE(ReplicationSeed(5, 3), ReplicationSeed(6, 3));
}

TEST(DistributionTest, SamplesFollowCdf) {
  for (const ScoreDistribution& d :
       {ScoreDistribution::Uniform(), ScoreDistribution::Exponential(2.0),
        ScoreDistribution::Contaminated()}) {
    Rng rng(1);
    const int draws = 100'000;
    int below = 0;
    const double probe = d.name() == "uniform" ? 0.3 : 0.5;
    for (int i = 0; i < draws; ++i) below += d.Sample(rng) <= probe;
    const double p = d.CdfAt(probe);
    EXPECT_NEAR(static_cast<double>(below) / draws, p,
                4 * std::sqrt(p * (1 - p) / draws))
        << d.name();
  }
}

TEST(SampleScoresTest, ShapeReproducibilityAndShift) {
  ExperimentConfig cfg = Config(Method::kFedCpQq, 4, 50, 1);
  cfg.heterogeneity = HeterogeneityModel::LinearLocation(4, 3.0);
  const ScoreMatrix a = *SampleScores(cfg, 9);
  const ScoreMatrix b = *SampleScores(cfg, 9);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a, b);
  for (int j = 0; j < 4; ++j) {
    ASSERT_EQ(a[j].size(), 50u);
    for (double v : a[j]) {
      EXPECT_GT(v, j * 1.0);
      EXPECT_LT(v, j * 1.0 + 1.0);
    }
  }
  cfg.heterogeneity = HeterogeneityModel::LinearLocation(3, 1.0);
  EXPECT_FALSE(SampleScores(cfg, 9).ok());
}

TEST(CoverageExperimentTest, ExactCoverageAveragesToGuarantee) {
  const ExperimentConfig cfg = Config(Method::kFedCpQq, 10, 20, 4000);
  const ExperimentSummary s = *CoverageExperiment(cfg);
  ASSERT_EQ(s.rows.size(), 4000u);
  EXPECT_NEAR(s.mean_coverage, 0.907914639971519, 3 * s.coverage_se);
  for (const ReplicationRow& row : s.rows) {
    EXPECT_EQ(row.uplinks, 10);
    EXPECT_EQ(row.mean_length, 2 * row.q_hat);
  }
}

TEST(CoverageExperimentTest, CentralizedUsesNoUplinks) {
  const ExperimentConfig cfg = Config(Method::kCentralized, 10, 20, 200);
  const ExperimentSummary s = *CoverageExperiment(cfg);
  EXPECT_EQ(s.rows[0].uplinks, 0);
  EXPECT_NEAR(s.mean_coverage, 181.0 / 201.0, 4 * s.coverage_se);
}

TEST(CoverageExperimentTest, SampledTestSetAndReproducibility) {
  ExperimentConfig cfg = Config(Method::kFedCpAvg, 5, 40, 20);
  cfg.distribution = ScoreDistribution::Exponential();
  cfg.test_size = 500;
  const ExperimentSummary a = *CoverageExperiment(cfg);
  const ExperimentSummary b = *CoverageExperiment(cfg);
  for (size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].coverage, b.rows[i].coverage);
    EXPECT_EQ(a.rows[i].seed, ReplicationSeed(cfg.spec.seed, i));
  }
}

TEST(CoverageExperimentTest, InfiniteThresholdsAreCounted) {
  ExperimentConfig cfg = Config(Method::kCentralized, 1, 5, 3);
  const ExperimentSummary s = *CoverageExperiment(cfg);
  EXPECT_EQ(s.infinite_count, 3);
  EXPECT_EQ(s.mean_coverage, 1.0);
  EXPECT_TRUE(std::isinf(s.mean_length));
}

TEST(CoverageExperimentTest, ExactModeNeedsCdf) {
  ExperimentConfig cfg = Config(Method::kFedCpQq, 3, 10, 2);
  cfg.distribution =
      ScoreDistribution::Custom("constant", [](Rng&) { return 1.0; });
  EXPECT_FALSE(CoverageExperiment(cfg).ok());
  cfg.test_size = 10;
  EXPECT_TRUE(CoverageExperiment(cfg).ok());
}

TEST(ConditionalTest, SummaryHelpers) {
  ConditionalSummary s;
  s.miscoverage = {0.05, 0.1, 0.2, 0.3};
  EXPECT_EQ(s.FractionAtMost(0.1), 0.5);
  EXPECT_EQ(s.Quantile(0.5), 0.1);
  EXPECT_EQ(s.Quantile(1.0), 0.3);
}

TEST(ConditionalTest, FixedIndexMatchesCdf) {
  const ExperimentConfig cfg = Config(Method::kFedCpQq, 10, 20, 300);
  const ConditionalSummary s =
      *ConditionalCoverageExperiment(cfg, QQIndex{19, 5});
  ASSERT_EQ(s.miscoverage.size(), 300u);
  // Expected conditional miscoverage is one minus the marginal coverage.
  EXPECT_NEAR(s.mean, 1 - 0.907914639971519, 4 * s.se);
}

TEST(HeterogeneityBoundTest, ZeroWithoutShift) {
  const HeterogeneityModel same = HeterogeneityModel::LinearLocation(6, 0.0);
  EXPECT_NEAR(*HeterogeneityTvBound(ScoreDistribution::Uniform(), same, 6, 20,
                                    18, 200, 1),
              0.0, 1e-12);
}

TEST(HeterogeneityBoundTest, GrowsWithShift) {
  const auto small = HeterogeneityModel::LinearLocation(6, 0.05);
  const auto large = HeterogeneityModel::LinearLocation(6, 0.5);
  const double a = *HeterogeneityTvBound(ScoreDistribution::Uniform(), small, 6,
                                         20, 18, 500, 1);
  const double b = *HeterogeneityTvBound(ScoreDistribution::Uniform(), large, 6,
                                         20, 18, 500, 1);
  EXPECT_GT(a, 0.0);
  EXPECT_LT(a, b);
  EXPECT_LE(b, 1.0);
}

TEST(SyntheticTest, DatasetRanges) {
  Rng rng(3);
  const auto data = SyntheticDataset(50'000, rng);
  int outliers = 0;
  for (const SyntheticPoint& p : data) {
    EXPECT_GE(p.x, 1.0);
    EXPECT_LE(p.x, 5.0);
    EXPECT_EQ(p.poisson_part, std::floor(p.poisson_part));
    outliers += p.outlier;
  }
  EXPECT_NEAR(outliers / 50'000.0, 0.01, 4 * std::sqrt(0.01 * 0.99 / 50'000));
}

TEST(SyntheticTest, ConditionalCdfMatchesSamples) {
  Rng rng(4);
  const double x = 2.5;
  // Keep only points in a narrow window around x.
  const auto data = SyntheticDataset(400'000, rng);
  int total = 0, below = 0;
  for (const SyntheticPoint& p : data) {
    if (std::abs(p.x - x) < 0.01) {
      ++total;
      below += p.y <= 1.0;
    }
  }
  const double want = SyntheticConditionalCdf(x, 1.0);
  EXPECT_NEAR(static_cast<double>(below) / total, want,
              4 * std::sqrt(want * (1 - want) / total) + 0.01);
}

TEST(SyntheticTest, OracleQuantileInterpolatesExactQuantile) {
  const OracleQuantile q = *OracleQuantile::Create(0.95);
  for (double x : {1.0, 1.7, 3.14, 4.99}) {
    EXPECT_NEAR(q(x), SyntheticConditionalQuantile(x, 0.95), 2e-2) << x;
    EXPECT_NEAR(
        SyntheticConditionalCdf(x, SyntheticConditionalQuantile(x, 0.95)), 0.95,
        1e-6);
  }
  EXPECT_FALSE(OracleQuantile::Create(1.0).ok());
}

TEST(SyntheticTest, CqrExperimentShape) {
  const auto rows = *SyntheticCqrExperiment(5, 40, 0.1, 3, 1000, 7);
  ASSERT_EQ(rows.size(), 3u);
  for (const SyntheticRow& r : rows) {
    EXPECT_GT(r.fedcp_qq.coverage, 0.5);
    EXPECT_TRUE(std::isfinite(r.fedcp_avg.mean_length));
  }
}

}  // namespace
}  // namespace fedcal
