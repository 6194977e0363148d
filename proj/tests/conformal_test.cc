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
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace fedcal {
namespace {

ScoreMatrix RandomMatrix(const std::vector<int64_t>& sizes, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> d(1.0);
  ScoreMatrix out;
  for (int64_t n : sizes) {
    ScoreSample s(n);
    for (double& v : s) v = d(rng);
    out.push_back(std::move(s));
  }
  return out;
}

TEST(MethodTest, NamesRoundTrip) {
  for (Method m : {Method::kCentralized, Method::kFedCpQq, Method::kFedCpAvg,
                   Method::kFedCp2Qq}) {
    EXPECT_EQ(*ParseMethod(MethodName(m)), m);
  }
  EXPECT_EQ(*ParseMethod("fedcp_qq"), Method::kFedCpQq);
  EXPECT_FALSE(ParseMethod("qq").ok());
}

TEST(SplitCpTest, PicksConformalRank) {
  std::vector<double> s;
  for (int i = 19; i >= 1; --i) s.push_back(i);
  const CalibrationResult r = *SplitCpCalibrate(s, 0.1);
  EXPECT_EQ(r.q_hat, 18.0);
  EXPECT_EQ(r.params.l, 18);
  EXPECT_EQ(*r.guaranteed_coverage, 0.9);
}

TEST(SplitCpTest, TooFewScoresGiveInfinity) {
  const std::vector<double> s{1.0, 2.0, 3.0};
  EXPECT_EQ(SplitCpCalibrate(s, 0.1)->q_hat, kInfiniteScore);
}

TEST(FedCpQqTest, SingleAgentEqualsSplitCp) {
  for (int64_t n : {9, 19, 37, 100}) {
    const ScoreMatrix m = RandomMatrix({n}, n);
    EXPECT_EQ(FedCpQqCalibrate(m, 0.1)->q_hat,
              SplitCpCalibrate(m[0], 0.1)->q_hat)
        << n;
  }
}

TEST(FedCpQqTest, OneScorePerAgentEqualsSplitCp) {
  const ScoreMatrix m = RandomMatrix(std::vector<int64_t>(29, 1), 5);
  std::vector<double> pooled;
  for (const auto& s : m) pooled.push_back(s[0]);
  EXPECT_EQ(FedCpQqCalibrate(m, 0.1)->q_hat,
            SplitCpCalibrate(pooled, 0.1)->q_hat);
}

TEST(FedCpQqTest, TenAgentsOfTwenty) {
  const ScoreMatrix m = RandomMatrix(std::vector<int64_t>(10, 20), 17);
  const CalibrationResult r = *FedCpQqCalibrate(m, 0.1);
  EXPECT_EQ(r.method, Method::kFedCpQq);
  EXPECT_EQ(r.params.l, 19);
  EXPECT_EQ(r.params.k, 5);
  EXPECT_NEAR(*r.guaranteed_coverage, 0.907914639971519, 1e-12);
  EXPECT_EQ(r.q_hat, *QuantileOfQuantiles(m, 19, 5));
}

TEST(FedCpQqTest, SharedTableGivesSameAnswer) {
  const ScoreMatrix m = RandomMatrix(std::vector<int64_t>(10, 20), 3);
  CoverageTable table = *CoverageTable::Create({10, 20});
  EXPECT_EQ(FedCpQqCalibrate(m, 0.1, &table)->q_hat,
            FedCpQqCalibrate(m, 0.1)->q_hat);
  EXPECT_TRUE(table.selected().has_value());
  CoverageTable wrong = *CoverageTable::Create({10, 21});
  EXPECT_FALSE(FedCpQqCalibrate(m, 0.1, &wrong).ok());
}

TEST(FedCpQqTest, UnbalancedAgents) {
  const ScoreMatrix m = RandomMatrix({5, 10}, 8);
  const CalibrationResult r = *FedCpQqCalibrate(m, 0.1);
  EXPECT_EQ(r.params.local_ranks, (std::vector<int64_t>{5, 10}));
  EXPECT_EQ(r.params.k, 2);
  EXPECT_NEAR(*r.guaranteed_coverage, 0.9375, 1e-12);
  EXPECT_EQ(r.q_hat, std::max(*std::max_element(m[0].begin(), m[0].end()),
                              *std::max_element(m[1].begin(), m[1].end())));
  CoverageTable table = *CoverageTable::Create({2, 5});
  EXPECT_FALSE(FedCpQqCalibrate(m, 0.1, &table).ok());
}

TEST(FedCpQqTest, InfeasibleLevel) {
  const ScoreMatrix m = RandomMatrix({3, 3}, 1);
  EXPECT_EQ(FedCpQqCalibrate(m, 0.1).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(FedCpQqTest, InvariantUnderPermutations) {
  ScoreMatrix m = RandomMatrix(std::vector<int64_t>(7, 12), 21);
  const double q = FedCpQqCalibrate(m, 0.1)->q_hat;
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    std::shuffle(m.begin(), m.end(), rng);
    for (auto& s : m) std::shuffle(s.begin(), s.end(), rng);
    EXPECT_EQ(FedCpQqCalibrate(m, 0.1)->q_hat, q);
  }
}

TEST(FedCpQqTest, EquivariantUnderIncreasingMaps) {
  const ScoreMatrix m = RandomMatrix(std::vector<int64_t>(6, 15), 9);
  ScoreMatrix t = m;
  for (auto& s : t) {
    for (double& v : s) v = 3.0 * v + 2.0;
  }
  EXPECT_DOUBLE_EQ(FedCpQqCalibrate(t, 0.1)->q_hat,
                   3.0 * FedCpQqCalibrate(m, 0.1)->q_hat + 2.0);
}

TEST(FedCpAvgTest, AveragesLocalQuantiles) {
  const ScoreMatrix m = RandomMatrix({19, 19, 39}, 2);
  const CalibrationResult r = *FedCpAvgCalibrate(m, 0.1);
  const double want = (*OrderStatistic(m[0], 18) + *OrderStatistic(m[1], 18) +
                       *OrderStatistic(m[2], 36)) /
                      3.0;
  EXPECT_NEAR(r.q_hat, want, 1e-12);
  EXPECT_FALSE(r.guaranteed_coverage.has_value());
  EXPECT_EQ(r.params.local_ranks, (std::vector<int64_t>{18, 18, 36}));
}

TEST(FedCpAvgTest, RankAboveSampleSizeRejected) {
  const ScoreMatrix m = RandomMatrix({5, 5}, 2);
  const auto r = FedCpAvgCalibrate(m, 0.1);
  EXPECT_EQ(r.status().code(), absl::StatusCode::kInvalidArgument);
}

TEST(PredictTest, AbsoluteResidualBand) {
  const ScoreFunction sf =
      ScoreFunction::AbsoluteResidual([](Features x) { return 2.0 * x[0]; });
  const std::vector<double> x{1.5};
  EXPECT_EQ(sf.Score(x, 4.0), 1.0);
  CalibrationResult r;
  r.q_hat = 0.5;
  const PredictionInterval iv = *PredictInterval(x, r, sf);
  EXPECT_EQ(iv.lower, 2.5);
  EXPECT_EQ(iv.upper, 3.5);
}

TEST(PredictTest, CqrBandAndCrossing) {
  const ScoreFunction sf = ScoreFunction::Cqr([](Features) { return -1.0; },
                                              [](Features) { return 1.0; });
  const std::vector<double> x{0.0};
  EXPECT_EQ(sf.Score(x, 0.0), -1.0);
  EXPECT_EQ(sf.Score(x, 3.0), 2.0);
  CalibrationResult r;
  r.q_hat = -0.25;
  PredictionInterval iv = *PredictInterval(x, r, sf);
  EXPECT_EQ(iv.lower, -0.75);
  EXPECT_EQ(iv.upper, 0.75);
  r.q_hat = -2.0;
  iv = *PredictInterval(x, r, sf);
  EXPECT_EQ(iv.lower, iv.upper);
}

TEST(PredictTest, InfiniteThresholdGivesWholeLine) {
  const ScoreFunction sf =
      ScoreFunction::AbsoluteResidual([](Features) { return 0.0; });
  CalibrationResult r;
  r.q_hat = kInfiniteScore;
  const PredictionInterval iv = *PredictInterval({}, r, sf);
  EXPECT_TRUE(std::isinf(iv.lower) && iv.lower < 0);
  EXPECT_TRUE(std::isinf(iv.upper) && iv.upper > 0);
}

TEST(PredictTest, KindMismatchRejected) {
  const ScoreFunction sf =
      ScoreFunction::AbsoluteResidual([](Features) { return 0.0; });
  CalibrationResult r;
  r.q_hat = 1.0;
  r.score_kind = ScoreKind::kCqr;
  EXPECT_FALSE(PredictInterval({}, r, sf).ok());
}

TEST(EvaluateTest, ClosedIntervalsAndInfiniteLengths) {
  const std::vector<PredictionInterval> iv{
      {0.0, 1.0}, {0.0, 1.0}, {-kInfiniteScore, kInfiniteScore}, {2.0, 4.0}};
  const std::vector<double> y{1.0, 1.5, 100.0, 2.0};
  const Metrics m = *Evaluate(iv, y);
  EXPECT_EQ(m.coverage, 0.75);
  EXPECT_EQ(m.infinite_count, 1);
  EXPECT_NEAR(m.mean_length, 4.0 / 3.0, 1e-15);
}

TEST(EvaluateTest, AllInfinite) {
  const std::vector<PredictionInterval> iv{{-kInfiniteScore, kInfiniteScore}};
  const std::vector<double> y{0.0};
  EXPECT_TRUE(std::isinf(Evaluate(iv, y)->mean_length));
}

TEST(EvaluateTest, BadShapes) {
  const std::vector<PredictionInterval> iv{{0.0, 1.0}};
  EXPECT_FALSE(Evaluate(iv, std::vector<double>{}).ok());
  EXPECT_FALSE(Evaluate(iv, std::vector<double>{1.0, 2.0}).ok());
}

}  // namespace
}  // namespace fedcal
