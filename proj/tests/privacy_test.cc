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
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "oracle.h"

namespace fedcal {
namespace {

// Bin index straight from the edge list, with 0 in the first bin.
int64_t NaiveBin(const std::vector<double>& edges, double s) {
  for (size_t b = 1; b < edges.size(); ++b) {
    if (s <= edges[b]) return static_cast<int64_t>(b);
  }
  return -1;
}

std::vector<double> NaiveUtilities(const std::vector<double>& s, double q,
                                   const std::vector<double>& edges) {
  const int64_t bins = static_cast<int64_t>(edges.size()) - 1;
  std::vector<double> u(bins);
  for (int64_t b = 1; b <= bins; ++b) {
    double below = 0, above = 0;
    for (double v : s) {
      const int64_t vb = NaiveBin(edges, v);
      if (vb < b) below += 1;
      if (vb > b) above += 1;
    }
    u[b - 1] = std::max((1 - q) * below, q * above) / std::max(q, 1 - q);
  }
  return u;
}

std::vector<double> RandomScores(int n, double smax, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, smax);
  std::vector<double> s(n);
  for (double& v : s) v = u(rng);
  return s;
}

TEST(BinGridTest, UniformEdgesAndMembership) {
  const BinGrid g = *BinGrid::Uniform(4, 2.0);
  EXPECT_EQ(g.bins(), 4);
  EXPECT_EQ(g.edges(), (std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0}));
  EXPECT_EQ(*g.BinOf(0.0), 1);
  EXPECT_EQ(*g.BinOf(0.5), 1);
  EXPECT_EQ(*g.BinOf(0.51), 2);
  EXPECT_EQ(*g.BinOf(2.0), 4);
  EXPECT_FALSE(g.BinOf(2.01).ok());
  EXPECT_FALSE(g.BinOf(-0.01).ok());
  EXPECT_FALSE(g.BinOf(std::nan("")).ok());
}

TEST(BinGridTest, RejectsBadEdges) {
  EXPECT_FALSE(BinGrid::Uniform(0, 1.0).ok());
  EXPECT_FALSE(BinGrid::Uniform(3, 0.0).ok());
  EXPECT_FALSE(BinGrid::FromEdges({0.0}).ok());
  EXPECT_FALSE(BinGrid::FromEdges({0.1, 1.0}).ok());
  EXPECT_FALSE(BinGrid::FromEdges({0.0, 1.0, 1.0}).ok());
  EXPECT_TRUE(BinGrid::FromEdges({0.0, 0.1, 5.0}).ok());
}

TEST(GammaGridTest, LogSpaced) {
  const std::vector<double> g = DefaultGammaGrid();
  ASSERT_EQ(g.size(), 20u);
  EXPECT_EQ(g.front(), 1e-3);
  EXPECT_EQ(g.back(), 0.5);
  for (size_t i = 2; i < g.size(); ++i) {
    EXPECT_NEAR(g[i] / g[i - 1], g[1] / g[0], 1e-12);
  }
}

TEST(DpQuantileTest, UtilitiesMatchNaiveCount) {
  const std::vector<double> edges{0.0, 0.1, 0.25, 0.5, 0.6, 1.0};
  const BinGrid g = *BinGrid::FromEdges(edges);
  std::vector<double> s = RandomScores(40, 1.0, 1);
  s.push_back(0.0);
  s.push_back(0.25);
  s.push_back(1.0);
  for (double q : {0.1, 0.5, 0.73, 0.9, 1.0}) {
    const auto u = *DpQuantileUtilities(s, q, g);
    const auto want = NaiveUtilities(s, q, edges);
    for (size_t b = 0; b < u.size(); ++b) {
      EXPECT_NEAR(u[b], want[b], 1e-12) << q << " " << b;
    }
  }
}

TEST(DpQuantileTest, DistributionIsNormalizedExponential) {
  const BinGrid g = *BinGrid::Uniform(10, 1.0);
  const std::vector<double> s = RandomScores(30, 1.0, 2);
  const auto p = *DpQuantileDistribution(s, 0.8, 2.0, g);
  const auto u = NaiveUtilities(s, 0.8, g.edges());
  double z = 0;
  for (double v : u) z += std::exp(-v);
  double total = 0;
  for (size_t b = 0; b < p.size(); ++b) {
    EXPECT_NEAR(p[b], std::exp(-u[b]) / z, 1e-12);
    total += p[b];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(DpQuantileTest, NeighbouringDatasetsWithinEpsilon) {
  const BinGrid g = *BinGrid::Uniform(16, 1.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s = RandomScores(25, 1.0, 100 + trial);
    const double q = 0.5 + 0.5 * unif(rng);
    const double eps = 0.1 + 3.0 * unif(rng);
    const auto p = *DpQuantileDistribution(s, q, eps, g);
    s[trial % s.size()] = unif(rng);
    const auto p2 = *DpQuantileDistribution(s, q, eps, g);
    for (size_t b = 0; b < p.size(); ++b) {
      EXPECT_LE(std::abs(std::log(p[b] / p2[b])), eps * (1 + 1e-9));
    }
  }
}

TEST(DpQuantileTest, SamplingFrequenciesMatchDistribution) {
  const BinGrid g = *BinGrid::Uniform(5, 1.0);
  const std::vector<double> s{0.05, 0.1, 0.3, 0.35, 0.5, 0.7, 0.9, 0.95};
  const auto p = *DpQuantileDistribution(s, 0.75, 1.0, g);
  Rng rng = MakeRng(7, 0);
  const int draws = 50'000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < draws; ++i) {
    const double e = *DpQuantile(s, 0.75, 1.0, g, rng);
    ++counts[NaiveBin(g.edges(), e) - 1];
    EXPECT_EQ(e, g.edge(NaiveBin(g.edges(), e)));
  }
  for (int b = 0; b < 5; ++b) {
    EXPECT_NEAR(static_cast<double>(counts[b]) / draws, p[b],
                3 * testing::BinomialSe(p[b], draws));
  }
}

TEST(DpQuantileTest, TwoBinsEqualWeights) {
  // Both edges have utility 4 / 2, so the mechanism is uniform.
  const BinGrid g = *BinGrid::Uniform(2, 1.0);
  const std::vector<double> s{0.1, 0.2, 0.6, 0.7};
  const auto p = *DpQuantileDistribution(s, 0.5, 1.0, g);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
}

TEST(DpQuantileTest, ModeAtTargetBin) {
  const BinGrid g = *BinGrid::Uniform(10, 1.0);
  std::vector<double> s;
  for (int b = 0; b < 10; ++b) s.push_back(0.05 + 0.1 * b);
  const auto p = *DpQuantileDistribution(s, 0.9, 50.0, g);
  // The ninth score is the 0.9-quantile; bin 10 ties with it.
  const double top = *std::max_element(p.begin(), p.end());
  EXPECT_NEAR(p[8], top, 1e-12);
  EXPECT_GT(p[8], 0.49);
}

TEST(DpQuantileTest, ConcentratedScoresAtLargeEpsilon) {
  const BinGrid g = *BinGrid::Uniform(2, 1.0);
  const std::vector<double> s(20, 0.3);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(*DpQuantile(s, 0.5, 100.0, g, rng), 0.5);
  }
}

TEST(DpQuantileTest, ReproducibleForFixedSeed) {
  const BinGrid g = *BinGrid::Uniform(50, 1.0);
  const std::vector<double> s = RandomScores(30, 1.0, 4);
  Rng a = MakeRng(11, 0), b = MakeRng(11, 0);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(*DpQuantile(s, 0.9, 1.0, g, a), *DpQuantile(s, 0.9, 1.0, g, b));
  }
}

TEST(DpQuantileTest, RejectsBadArguments) {
  const BinGrid g;
  const std::vector<double> s{0.5};
  Rng rng(1);
  EXPECT_FALSE(DpQuantile(s, 0.0, 1.0, g, rng).ok());
  EXPECT_FALSE(DpQuantile(s, 1.1, 1.0, g, rng).ok());
  EXPECT_FALSE(DpQuantile(s, 0.5, 0.0, g, rng).ok());
  EXPECT_FALSE(DpQuantile({}, 0.5, 1.0, g, rng).ok());
  EXPECT_FALSE(DpQuantile(std::vector<double>{1.5}, 0.5, 1.0, g, rng).ok());
  EXPECT_TRUE(DpQuantile(s, 1.0, 1.0, g, rng).ok());
}

struct LCorFixture {
  double eps;
  int64_t bins, m;
  double ga;
  int64_t want;
};

// Exact-arithmetic evaluation of the rank correction, frozen here.
const LCorFixture kLCor[] = {
    {1, 100, 10, .05, 20},    {0.5, 100, 10, .05, 40},
    {2, 100, 10, .05, 10},    {5, 100, 10, .05, 4},
    {10, 100, 10, .05, 2},    {1, 50, 10, .05, 19},
    {1, 200, 10, .05, 22},    {1, 1000, 10, .05, 25},
    {1, 100, 1, .05, 16},     {1, 100, 5, .05, 19},
    {1, 100, 50, .05, 23},    {1, 100, 100, .05, 25},
    {1, 100, 10, .001, 28},   {1, 100, 10, .01, 24},
    {1, 100, 10, .1, 19},     {3, 64, 20, .02, 8},
    {0.1, 100, 10, .05, 198}, {7, 10, 3, .3, 2},
    {1e6, 100, 10, .05, 1},   {0.25, 1000, 200, .0001, 172},
};

TEST(LCorTest, FrozenValues) {
  for (const LCorFixture& f : kLCor) {
    EXPECT_EQ(*LCor(f.eps, f.bins, f.m, f.ga), f.want)
        << f.eps << " " << f.bins << " " << f.m << " " << f.ga;
  }
}

TEST(LCorTest, Monotone) {
  for (double eps : {0.3, 1.0, 4.0}) {
    EXPECT_GE(*LCor(eps, 100, 20, 0.05), *LCor(eps * 2, 100, 20, 0.05));
    EXPECT_LE(*LCor(eps, 100, 20, 0.05), *LCor(eps, 400, 20, 0.05));
    EXPECT_LE(*LCor(eps, 100, 20, 0.05), *LCor(eps, 100, 80, 0.05));
  }
  EXPECT_FALSE(LCor(1.0, 100, 10, 0.0).ok());
  EXPECT_FALSE(LCor(-1.0, 100, 10, 0.1).ok());
}

TEST(ChooseGammaTest, MinimizesCorrectedCoverageOverGrid) {
  const TableKey key{5, 200};
  CoverageTable table = *CoverageTable::Create(key);
  const std::vector<double> grid = DefaultGammaGrid();
  const GammaChoice c = *ChooseGamma(table, 0.1, 1.0, 100, grid);
  double best = 2.0;
  double best_gamma = 0.0;
  for (double g : grid) {
    const double ap = 0.1 * (1 - g) / (1 - g * 0.1);
    const auto sel = FindLkStar(key, ap);
    if (!sel.ok()) continue;
    const int64_t lc = *LCor(1.0, 100, 5, g * 0.1);
    if (sel->index.l + lc > key.n) continue;
    const double v = *MlkFast(key, {sel->index.l + lc, sel->index.k});
    if (v < best - 1e-12) {
      best = v;
      best_gamma = g;
    }
  }
  EXPECT_EQ(c.gamma, best_gamma);
  EXPECT_NEAR(c.corrected_coverage, best, 1e-12);
  EXPECT_GE(c.corrected_coverage, 0.9);
  EXPECT_NEAR(c.alpha_prime, 0.1 * (1 - c.gamma) / (1 - 0.1 * c.gamma), 1e-15);
}

TEST(ChooseGammaTest, InfeasibleWhenCorrectionTooLarge) {
  CoverageTable table = *CoverageTable::Create({5, 10});
  const std::vector<double> grid = DefaultGammaGrid();
  EXPECT_EQ(ChooseGamma(table, 0.1, 0.1, 100, grid).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(PlanTest, QuantileLevelAndAmplification) {
  DpConfig cfg;
  cfg.epsilon = 1.0;
  cfg.grid = *BinGrid::Uniform(100, 1.0);
  const DpPlan plan = *PlanFedCp2Qq({5, 200}, 0.1, cfg);
  EXPECT_EQ(plan.effective_epsilon, 1.0);
  EXPECT_EQ(plan.quantile_level,
            std::max((plan.choice.index.l + plan.choice.l_cor) / 200.0, 0.5));
  cfg.amplification = 4.0;
  const DpPlan amplified = *PlanFedCp2Qq({5, 200}, 0.1, cfg);
  EXPECT_EQ(amplified.effective_epsilon, 4.0);
  EXPECT_LE(amplified.choice.l_cor, plan.choice.l_cor);
  cfg.amplification = 0.5;
  EXPECT_FALSE(PlanFedCp2Qq({5, 200}, 0.1, cfg).ok());
}

TEST(PlanTest, FixedGamma) {
  DpConfig cfg;
  cfg.grid = *BinGrid::Uniform(100, 1.0);
  cfg.epsilon = 5.0;
  cfg.gamma = 0.2;
  const DpPlan plan = *PlanFedCp2Qq({5, 200}, 0.1, cfg);
  EXPECT_EQ(plan.choice.gamma, 0.2);
  EXPECT_EQ(plan.choice.l_cor, *LCor(5.0, 100, 5, 0.02));
  // At epsilon = 1 this gamma leaves no room for the correction.
  cfg.epsilon = 1.0;
  EXPECT_EQ(PlanFedCp2Qq({5, 200}, 0.1, cfg).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

ScoreMatrix UniformMatrix(int64_t m, int64_t n, uint64_t seed) {
  ScoreMatrix out;
  for (int64_t j = 0; j < m; ++j) out.push_back(RandomScores(n, 1.0, seed + j));
  return out;
}

TEST(FedCp2QqTest, ReproducibleAndOnGrid) {
  DpConfig cfg;
  cfg.grid = *BinGrid::Uniform(100, 1.0);
  const ScoreMatrix s = UniformMatrix(5, 200, 40);
  const CalibrationResult a = *FedCp2QqCalibrate(s, 0.1, cfg, 123);
  const CalibrationResult b = *FedCp2QqCalibrate(s, 0.1, cfg, 123);
  EXPECT_EQ(a.q_hat, b.q_hat);
  EXPECT_EQ(a.method, Method::kFedCp2Qq);
  EXPECT_EQ(*a.guaranteed_coverage, 0.9);
  const auto& e = cfg.grid.edges();
  EXPECT_NE(std::find(e.begin(), e.end(), a.q_hat), e.end());
  EXPECT_EQ(a.params.bins, 100);
  EXPECT_EQ(a.params.smax, 1.0);
}

TEST(FedCp2QqTest, LargeEpsilonSandwichedByNonPrivateQuantiles) {
  DpConfig cfg;
  cfg.epsilon = 1e4;
  cfg.grid = *BinGrid::Uniform(1000, 1.0);
  CoverageTable table = *CoverageTable::Create({5, 200});
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const ScoreMatrix s = UniformMatrix(5, 200, 1000 * seed);
    const DpPlan plan = *PlanFedCp2Qq({5, 200}, 0.1, cfg, &table);
    const int64_t l = std::llround(plan.quantile_level * 200);
    const int64_t k = plan.choice.index.k;
    const double q = FedCp2QqCalibrate(s, 0.1, cfg, seed, &table)->q_hat;
    const double lo =
        cfg.grid.edge(*cfg.grid.BinOf(*QuantileOfQuantiles(s, l, k)));
    const double hi =
        cfg.grid.edge(*cfg.grid.BinOf(*QuantileOfQuantiles(s, l + 1, k)));
    EXPECT_LE(lo, q);
    EXPECT_LE(q, hi);
  }
}

TEST(FedCp2QqTest, IdenticalConcentratedAgents) {
  DpConfig cfg;
  cfg.epsilon = 1e3;
  cfg.grid = *BinGrid::Uniform(10, 1.0);
  const ScoreMatrix s(5, std::vector<double>(200, 0.42));
  EXPECT_EQ(FedCp2QqCalibrate(s, 0.1, cfg, 9)->q_hat, cfg.grid.edge(5));
}

TEST(FedCp2QqTest, WithinOneBinWhenNeighboursShareABin) {
  DpConfig cfg;
  cfg.epsilon = 1e6;
  cfg.grid = *BinGrid::Uniform(40, 1.0);
  ScoreMatrix s(5);
  for (int i = 0; i < 200; ++i) {
    for (auto& agent : s) agent.push_back((i + 0.5) / 200.0);
  }
  CoverageTable table = *CoverageTable::Create({5, 200});
  const DpPlan plan = *PlanFedCp2Qq({5, 200}, 0.1, cfg, &table);
  const int64_t l = std::llround(plan.quantile_level * 200);
  // The claim needs the l-th and (l+1)-th local scores in one bin.
  ASSERT_EQ(*cfg.grid.BinOf(*OrderStatistic(s[0], l)),
            *cfg.grid.BinOf(*OrderStatistic(s[0], l + 1)));
  const double exact = *QuantileOfQuantiles(s, l, plan.choice.index.k);
  const double width = 1.0 / 40;
  int inside = 0;
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    const double q = FedCp2QqCalibrate(s, 0.1, cfg, seed, &table)->q_hat;
    if (q >= exact && q <= exact + width) ++inside;
  }
  EXPECT_GE(inside, 999);
}

TEST(FedCp2QqTest, RejectsUnbalancedAndOutOfRange) {
  DpConfig cfg;
  ScoreMatrix s = UniformMatrix(5, 200, 1);
  s[0].pop_back();
  EXPECT_FALSE(FedCp2QqCalibrate(s, 0.1, cfg, 1).ok());
  s = UniformMatrix(5, 200, 1);
  s[2][3] = 1.5;
  EXPECT_FALSE(FedCp2QqCalibrate(s, 0.1, cfg, 1).ok());
}

}  // namespace
}  // namespace fedcal
