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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "fedcal/poisson_binomial.h"
#include "fedcal/status_macros.h"
#include "fedcal/synthetic.h"

namespace fedcal {
namespace {

// Stream tags separating the draws of one replication.
constexpr uint64_t kCalibrationStream = 2;
constexpr uint64_t kTestStream = 3;
constexpr uint64_t kSyntheticCalibrationStream = 4;
constexpr uint64_t kSyntheticTestStream = 5;
constexpr uint64_t kBoundStream = 6;

double Apply(const AffineShift& shift, double s) {
  return shift.location + shift.scale * s;
}

double ShiftedCdf(const ScoreDistribution& base, const AffineShift& shift,
                  double s) {
  return base.CdfAt((s - shift.location) / shift.scale);
}

double BinomialUpperTail(int64_t n, double p, int64_t l) {
  const std::vector<double> pmf = BinomialPmf(n, p);
  double tail = 0.0;
  for (int64_t i = n; i >= l; --i) tail += pmf[i];
  return std::min(tail, 1.0);
}

void MeanAndSe(const std::vector<double>& values, double* mean, double* se) {
  const double count = static_cast<double>(values.size());
  *mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
  double ss = 0.0;
  for (double v : values) ss += (v - *mean) * (v - *mean);
  *se = values.size() > 1 ? std::sqrt(ss / (count - 1.0) / count) : 0.0;
}

}  // namespace

ScoreDistribution ScoreDistribution::Uniform() {
  return ScoreDistribution(
      "uniform", [](Rng& rng) { return UniformOpen(rng); },
      Cdf([](double s) { return std::clamp(s, 0.0, 1.0); }));
}

ScoreDistribution ScoreDistribution::Exponential(double rate) {
  return ScoreDistribution(
      "exponential",
      [rate](Rng& rng) { return -std::log(UniformOpen(rng)) / rate; },
      Cdf([rate](double s) {
        return s <= 0.0 ? 0.0 : -std::expm1(-rate * s);
      }));
}

ScoreDistribution ScoreDistribution::Contaminated() {
  return ScoreDistribution(
      "contaminated",
      [](Rng& rng) {
        std::normal_distribution<double> normal;
        const double u = UniformOpen(rng);
        const double z = normal(rng);
        return std::abs(u < 0.01 ? 25.0 * z : z);
      },
      Cdf([](double s) {
        if (s <= 0.0) return 0.0;
        return 0.99 * std::erf(s / std::sqrt(2.0)) +
               0.01 * std::erf(s / (25.0 * std::sqrt(2.0)));
      }));
}

ScoreDistribution ScoreDistribution::Custom(std::string name, Sampler sampler,
                                            std::optional<Cdf> cdf) {
  return ScoreDistribution(std::move(name), std::move(sampler), std::move(cdf));
}

HeterogeneityModel HeterogeneityModel::LinearLocation(int64_t m,
                                                      double max_shift) {
  HeterogeneityModel model;
  model.agents.resize(m);
  for (int64_t j = 0; j < m; ++j) {
    model.agents[j].location =
        m > 1 ? max_shift * static_cast<double>(j) / static_cast<double>(m - 1)
              : 0.0;
  }
  return model;
}

AffineShift HeterogeneityModel::ForAgent(int64_t j) const {
  return agents.empty() ? AffineShift{} : agents[j];
}

absl::Status ValidateHeterogeneity(const HeterogeneityModel& model, int64_t m) {
  if (!model.agents.empty() && static_cast<int64_t>(model.agents.size()) != m) {
    return absl::InvalidArgumentError(
        absl::StrCat("heterogeneity model has ", model.agents.size(),
                     " agent shifts for m = ", m));
  }
  std::vector<AffineShift> all = model.agents;
  all.push_back(model.test);
  for (const AffineShift& s : all) {
    if (!std::isfinite(s.location) || !std::isfinite(s.scale) ||
        !(s.scale > 0.0)) {
      return absl::InvalidArgumentError(
          "shifts need a finite location and a positive finite scale");
    }
  }
  return absl::OkStatus();
}

uint64_t ReplicationSeed(uint64_t seed, int64_t r) {
  return DeriveSeed(seed, static_cast<uint64_t>(r));
}

absl::StatusOr<ScoreMatrix> SampleScores(const ExperimentConfig& cfg,
                                         uint64_t rep_seed) {
  FEDCAL_ASSIGN_OR_RETURN(std::vector<int64_t> sizes, ResolveSizes(cfg.spec));
  FEDCAL_RETURN_IF_ERROR(ValidateHeterogeneity(cfg.heterogeneity, cfg.spec.m));
  ScoreMatrix scores(cfg.spec.m);
  for (int64_t j = 0; j < cfg.spec.m; ++j) {
    Rng rng = MakeRng(rep_seed, static_cast<uint64_t>(j), kCalibrationStream);
    const AffineShift shift = cfg.heterogeneity.ForAgent(j);
    scores[j].reserve(sizes[j]);
    for (int64_t i = 0; i < sizes[j]; ++i) {
      scores[j].push_back(Apply(shift, cfg.distribution.Sample(rng)));
    }
  }
  return scores;
}

absl::StatusOr<CalibrationResult> CalibrateReplication(
    const ExperimentConfig& cfg, const ScoreMatrix& scores, uint64_t rep_seed,
    CoverageTable* table, int64_t* uplinks) {
  if (cfg.method == Method::kCentralized) {
    ScoreSample pooled;
    for (const ScoreSample& s : scores) {
      pooled.insert(pooled.end(), s.begin(), s.end());
    }
    if (uplinks != nullptr) *uplinks = 0;
    return SplitCpCalibrate(pooled, cfg.spec.alpha);
  }
  FederationSpec spec = cfg.spec;
  spec.seed = rep_seed;
  OneShotOptions options;
  options.dp = cfg.dp;
  options.table = table;
  FEDCAL_ASSIGN_OR_RETURN(OneShotRun run,
                          RunOneShot(spec, scores, cfg.method, options));
  if (uplinks != nullptr) {
    *uplinks = static_cast<int64_t>(run.transcript.uplinks().size());
  }
  return run.result;
}

namespace {

// A shared table when the data are balanced, so the (l, k) search runs once.
absl::StatusOr<std::optional<CoverageTable>> MaybeTable(
    const ExperimentConfig& cfg) {
  FEDCAL_ASSIGN_OR_RETURN(std::vector<int64_t> sizes, ResolveSizes(cfg.spec));
  const bool balanced = std::all_of(sizes.begin(), sizes.end(),
                                    [&](int64_t s) { return s == sizes[0]; });
  if (!balanced || cfg.method == Method::kCentralized ||
      cfg.method == Method::kFedCpAvg) {
    return std::optional<CoverageTable>();
  }
  FEDCAL_ASSIGN_OR_RETURN(CoverageTable table,
                          CoverageTable::Create({cfg.spec.m, sizes[0]}));
  return std::optional<CoverageTable>(std::move(table));
}

}  // namespace

absl::StatusOr<ExperimentSummary> CoverageExperiment(
    const ExperimentConfig& cfg) {
  if (cfg.replications < 1) {
    return absl::InvalidArgumentError("need at least one replication");
  }
  if (cfg.test_size < 0) {
    return absl::InvalidArgumentError("test size must be >= 0");
  }
  if (cfg.test_size == 0 && !cfg.distribution.has_cdf()) {
    return absl::InvalidArgumentError(
        "exact coverage needs a score distribution with a known c.d.f.; set "
        "a positive test size instead");
  }
  FEDCAL_ASSIGN_OR_RETURN(std::optional<CoverageTable> table, MaybeTable(cfg));
  CoverageTable* table_ptr = table.has_value() ? &*table : nullptr;

  ExperimentSummary summary;
  summary.rows.reserve(cfg.replications);
  std::vector<double> coverages;
  double length_sum = 0.0;
  int64_t finite = 0;
  for (int64_t r = 0; r < cfg.replications; ++r) {
    const uint64_t rep_seed = ReplicationSeed(cfg.spec.seed, r);
    FEDCAL_ASSIGN_OR_RETURN(ScoreMatrix scores, SampleScores(cfg, rep_seed));
    ReplicationRow row;
    row.method = cfg.method;
    row.seed = rep_seed;
    FEDCAL_ASSIGN_OR_RETURN(
        CalibrationResult result,
        CalibrateReplication(cfg, scores, rep_seed, table_ptr, &row.uplinks));
    row.q_hat = result.q_hat;
    const AffineShift& test = cfg.heterogeneity.test;
    if (result.q_hat == kInfiniteScore) {
      row.coverage = 1.0;
    } else if (cfg.test_size == 0) {
      row.coverage = ShiftedCdf(cfg.distribution, test, result.q_hat);
    } else {
      Rng rng = MakeRng(rep_seed, 0, kTestStream);
      int64_t covered = 0;
      for (int64_t i = 0; i < cfg.test_size; ++i) {
        if (Apply(test, cfg.distribution.Sample(rng)) <= result.q_hat) {
          ++covered;
        }
      }
      row.coverage =
          static_cast<double>(covered) / static_cast<double>(cfg.test_size);
    }
    row.mean_length = 2.0 * result.q_hat;
    if (std::isfinite(row.mean_length)) {
      length_sum += row.mean_length;
      ++finite;
    } else {
      ++summary.infinite_count;
    }
    coverages.push_back(row.coverage);
    summary.rows.push_back(row);
  }
  MeanAndSe(coverages, &summary.mean_coverage, &summary.coverage_se);
  summary.mean_length =
      finite > 0 ? length_sum / static_cast<double>(finite) : kInfiniteScore;
  return summary;
}

double ConditionalSummary::FractionAtMost(double bound) const {
  if (miscoverage.empty()) return 0.0;
  const auto count = std::count_if(miscoverage.begin(), miscoverage.end(),
                                   [&](double a) { return a <= bound; });
  return static_cast<double>(count) / static_cast<double>(miscoverage.size());
}

double ConditionalSummary::Quantile(double level) const {
  if (miscoverage.empty()) return 0.0;
  std::vector<double> sorted = miscoverage;
  std::sort(sorted.begin(), sorted.end());
  const int64_t rank = std::clamp<int64_t>(
      static_cast<int64_t>(
          std::ceil(level * static_cast<double>(sorted.size()))),
      1, static_cast<int64_t>(sorted.size()));
  return sorted[rank - 1];
}

absl::StatusOr<ConditionalSummary> ConditionalCoverageExperiment(
    const ExperimentConfig& cfg, std::optional<QQIndex> index) {
  if (!cfg.distribution.has_cdf()) {
    return absl::InvalidArgumentError(
        "conditional miscoverage needs a score distribution with a known "
        "c.d.f.");
  }
  if (cfg.replications < 1) {
    return absl::InvalidArgumentError("need at least one replication");
  }
  std::optional<CoverageTable> table;
  if (!index.has_value()) {
    FEDCAL_ASSIGN_OR_RETURN(table, MaybeTable(cfg));
  }
  CoverageTable* table_ptr = table.has_value() ? &*table : nullptr;
  ConditionalSummary summary;
  summary.miscoverage.reserve(cfg.replications);
  for (int64_t r = 0; r < cfg.replications; ++r) {
    const uint64_t rep_seed = ReplicationSeed(cfg.spec.seed, r);
    FEDCAL_ASSIGN_OR_RETURN(ScoreMatrix scores, SampleScores(cfg, rep_seed));
    double q_hat = 0.0;
    if (index.has_value()) {
      FEDCAL_ASSIGN_OR_RETURN(q_hat,
                              QuantileOfQuantiles(scores, index->l, index->k));
    } else {
      FEDCAL_ASSIGN_OR_RETURN(
          CalibrationResult result,
          CalibrateReplication(cfg, scores, rep_seed, table_ptr));
      q_hat = result.q_hat;
    }
    const double covered =
        q_hat == kInfiniteScore
            ? 1.0
            : ShiftedCdf(cfg.distribution, cfg.heterogeneity.test, q_hat);
    summary.miscoverage.push_back(1.0 - covered);
  }
  MeanAndSe(summary.miscoverage, &summary.mean, &summary.se);
  return summary;
}

absl::StatusOr<double> HeterogeneityTvBound(const ScoreDistribution& base,
                                            const HeterogeneityModel& model,
                                            int64_t m, int64_t n, int64_t l,
                                            int64_t samples, uint64_t seed) {
  if (!base.has_cdf()) {
    return absl::InvalidArgumentError(
        "the heterogeneity bound needs a distribution with a known c.d.f.");
  }
  if (m < 1 || n < 1 || l < 1 || l > n || samples < 1) {
    return absl::InvalidArgumentError(
        "need m, n, samples >= 1 and 1 <= l <= n");
  }
  FEDCAL_RETURN_IF_ERROR(ValidateHeterogeneity(model, m));
  Rng rng = MakeRng(seed, 0, kBoundStream);
  double total = 0.0;
  std::vector<double> p(m);
  for (int64_t t = 0; t < samples; ++t) {
    const double s = Apply(model.test, base.Sample(rng));
    for (int64_t j = 0; j < m; ++j) {
      p[j] = BinomialUpperTail(n, ShiftedCdf(base, model.ForAgent(j), s), l);
    }
    const double p_iid =
        BinomialUpperTail(n, ShiftedCdf(base, model.test, s), l);
    FEDCAL_ASSIGN_OR_RETURN(std::vector<double> pmf, PoissonBinomialPmf(p));
    total += TotalVariation(pmf, BinomialPmf(m, p_iid));
  }
  return total / static_cast<double>(samples);
}

absl::StatusOr<std::vector<SyntheticRow>> SyntheticCqrExperiment(
    int64_t m, int64_t n, double alpha, int64_t replications, int64_t test_size,
    uint64_t seed) {
  if (m < 1 || n < 1 || replications < 1 || test_size < 1) {
    return absl::InvalidArgumentError(
        "need m, n, replications and test size >= 1");
  }
  FEDCAL_ASSIGN_OR_RETURN(OracleQuantile lower,
                          OracleQuantile::Create(alpha / 2.0));
  FEDCAL_ASSIGN_OR_RETURN(OracleQuantile upper,
                          OracleQuantile::Create(1.0 - alpha / 2.0));
  const ScoreFunction sf =
      ScoreFunction::Cqr([&lower](Features x) { return lower(x[0]); },
                         [&upper](Features x) { return upper(x[0]); });
  FEDCAL_ASSIGN_OR_RETURN(CoverageTable table, CoverageTable::Create({m, n}));

  std::vector<SyntheticRow> rows;
  rows.reserve(replications);
  for (int64_t r = 0; r < replications; ++r) {
    SyntheticRow row;
    row.seed = ReplicationSeed(seed, r);
    Rng cal_rng = MakeRng(row.seed, 0, kSyntheticCalibrationStream);
    Rng test_rng = MakeRng(row.seed, 0, kSyntheticTestStream);
    const std::vector<SyntheticPoint> cal = SyntheticDataset(m * n, cal_rng);
    const std::vector<SyntheticPoint> test =
        SyntheticDataset(test_size, test_rng);

    ScoreMatrix scores(m);
    ScoreSample pooled;
    pooled.reserve(m * n);
    for (int64_t j = 0; j < m; ++j) {
      for (int64_t i = 0; i < n; ++i) {
        const SyntheticPoint& pt = cal[j * n + i];
        const double s = sf.Score(std::span<const double>(&pt.x, 1), pt.y);
        scores[j].push_back(s);
        pooled.push_back(s);
      }
    }
    FEDCAL_ASSIGN_OR_RETURN(CalibrationResult central,
                            SplitCpCalibrate(pooled, alpha));
    FEDCAL_ASSIGN_OR_RETURN(CalibrationResult qq,
                            FedCpQqCalibrate(scores, alpha, &table));
    FEDCAL_ASSIGN_OR_RETURN(CalibrationResult avg,
                            FedCpAvgCalibrate(scores, alpha));

    std::vector<double> y(test.size());
    for (size_t i = 0; i < test.size(); ++i) y[i] = test[i].y;
    auto evaluate =
        [&](const CalibrationResult& result) -> absl::StatusOr<Metrics> {
      std::vector<PredictionInterval> intervals;
      intervals.reserve(test.size());
      for (const SyntheticPoint& pt : test) {
        FEDCAL_ASSIGN_OR_RETURN(
            PredictionInterval iv,
            PredictInterval(std::span<const double>(&pt.x, 1), result, sf));
        intervals.push_back(iv);
      }
      return Evaluate(intervals, y);
    };
    FEDCAL_ASSIGN_OR_RETURN(row.centralized, evaluate(central));
    FEDCAL_ASSIGN_OR_RETURN(row.fedcp_qq, evaluate(qq));
    FEDCAL_ASSIGN_OR_RETURN(row.fedcp_avg, evaluate(avg));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fedcal
