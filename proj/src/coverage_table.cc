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
#include "fedcal/coverage_table.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedcal/log_prob.h"
#include "fedcal/order_stats.h"
#include "fedcal/status_macros.h"

namespace fedcal {

using internal::kLogPruneWindow;
using internal::kLogZero;
using internal::LogChoose;
using internal::LogPolynomial;

namespace {

// Allowed excursion of a computed coverage outside [0, 1] before it is
// treated as a numerical failure rather than rounding.
constexpr double kRangeSlack = 1e-9;

absl::Status CheckAlpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("alpha must lie in (0, 1), got ", alpha));
  }
  return absl::OkStatus();
}

absl::StatusOr<double> FinishCoverage(double tail_sum, int64_t total) {
  const double m = 1.0 - tail_sum / static_cast<double>(total + 1);
  if (!std::isfinite(m) || m < -kRangeSlack || m > 1.0 + kRangeSlack) {
    return absl::InternalError(absl::StrFormat(
        "coverage evaluation produced %.17g (tail sum %.17g); log-space "
        "weights overflowed",
        m, tail_sum));
  }
  return std::clamp(m, 0.0, 1.0);
}

// log P(sum W = r) for W ~ Binomial(total, t), r = 0..total.
std::vector<double> LogBinomialRow(int64_t total, double t) {
  const long double log_t = std::log(static_cast<long double>(t));
  const long double log1m_t = std::log1p(-static_cast<long double>(t));
  std::vector<double> row(total + 1);
  for (int64_t r = 0; r <= total; ++r) {
    row[r] = internal::LogBinomialPmf(total, r, log_t, log1m_t);
  }
  return row;
}

// log sum_r exp(poly_r - log_binom_row[r]).
double LogWeightedMass(const LogPolynomial& poly,
                       const std::vector<double>& log_binom_row) {
  double mx = kLogZero;
  for (int64_t r = poly.lowest_degree(); r <= poly.highest_degree(); ++r) {
    mx = std::max(mx, poly.at(r) - log_binom_row[r]);
  }
  if (mx == kLogZero || !std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (int64_t r = poly.lowest_degree(); r <= poly.highest_degree(); ++r) {
    const double v = poly.at(r) - log_binom_row[r];
    if (v >= mx - kLogPruneWindow) sum += std::exp(v - mx);
  }
  return mx + std::log(sum);
}

}  // namespace

namespace internal {

class ColumnEvaluator {
 public:
  ColumnEvaluator(const TableKey& key, int64_t l)
      : key_(key), l_(l), next_j_(key.m) {
    const double t = static_cast<double>(l) / static_cast<double>(key.n + 1);
    high_ = TruncatedBinomial(key.n, l, key.n, t, &log_mass_high_);
    low_ = TruncatedBinomial(key.n, 0, l - 1, t, &log_mass_low_);
    log_binom_row_ = LogBinomialRow(key.m * key.n, t);
    high_powers_.reserve(key.m + 1);
    high_powers_.push_back(LogPolynomial::One());
    for (int64_t j = 1; j <= key.m; ++j) {
      high_powers_.push_back(LogMultiply(high_powers_.back(), high_));
    }
    low_power_ = LogPolynomial::One();
  }

  int64_t l() const { return l_; }
  int64_t next_j() const { return next_j_; }

  // T_j for j = next_j(); afterwards next_j() decreases by one.
  absl::StatusOr<double> NextTerm() {
    const int64_t j = next_j_;
    if (j < 0) return absl::InternalError("column exhausted");
    if (j < key_.m) low_power_ = LogMultiply(low_power_, low_);
    --next_j_;
    const LogPolynomial& a = high_powers_[j];
    const LogPolynomial& b = low_power_;
    const double log_scale = LogChoose(key_.m, j) +
                             static_cast<double>(j) * log_mass_high_ +
                             static_cast<double>(key_.m - j) * log_mass_low_;

    // sum_{i, s} exp(a_i + b_s - log P(sum W = i + s)).
    const int64_t na = static_cast<int64_t>(a.log_coef.size());
    const int64_t nb = static_cast<int64_t>(b.log_coef.size());
    const double* w = log_binom_row_.data() + a.offset + b.offset;
    double mx = kLogZero;
    for (int64_t i = 0; i < na; ++i) {
      const double ai = a.log_coef[i];
      for (int64_t s = 0; s < nb; ++s) {
        mx = std::max(mx, ai + b.log_coef[s] - w[i + s]);
      }
    }
    if (mx == kLogZero) return 0.0;
    if (!std::isfinite(mx)) {
      return absl::InternalError(
          absl::StrCat("non-finite log weight in column l=", l_, ", j=", j));
    }
    const double floor = mx - kLogPruneWindow;
    double sum = 0.0;
    for (int64_t i = 0; i < na; ++i) {
      const double ai = a.log_coef[i];
      for (int64_t s = 0; s < nb; ++s) {
        const double v = ai + b.log_coef[s] - w[i + s];
        if (v >= floor) sum += std::exp(v - mx);
      }
    }
    const double term = std::exp(log_scale + mx + std::log(sum));
    if (!std::isfinite(term)) {
      return absl::InternalError(
          absl::StrCat("log-space overflow in column l=", l_, ", j=", j));
    }
    return term;
  }

 private:
  TableKey key_;
  int64_t l_;
  int64_t next_j_;
  LogPolynomial high_;
  LogPolynomial low_;
  double log_mass_high_ = 0.0;
  double log_mass_low_ = 0.0;
  std::vector<double> log_binom_row_;
  std::vector<LogPolynomial> high_powers_;
  LogPolynomial low_power_;
};

}  // namespace internal

absl::Status ValidateKey(const TableKey& key, int64_t max_cells) {
  if (key.m < 1 || key.n < 1) {
    return absl::InvalidArgumentError(absl::StrCat(
        "table key needs m >= 1 and n >= 1, got m=", key.m, " n=", key.n));
  }
  if (key.m > max_cells / key.n) {
    return absl::ResourceExhaustedError(
        absl::StrCat("m*n = ", key.m, "*", key.n, " exceeds the cap of ",
                     max_cells, " cells"));
  }
  return absl::OkStatus();
}

namespace {

absl::Status CheckIndexFor(const TableKey& key, const QQIndex& idx) {
  if (idx.l < 1 || idx.l > key.n || idx.k < 1 || idx.k > key.m) {
    return absl::InvalidArgumentError(
        absl::StrCat("index (l=", idx.l, ", k=", idx.k, ") outside [1, ", key.n,
                     "] x [1, ", key.m, "]"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<double> MlkBruteForce(const TableKey& key, const QQIndex& idx,
                                     int64_t max_cells) {
  FEDCAL_RETURN_IF_ERROR(ValidateKey(key));
  if (key.m * key.n > max_cells) {
    return absl::ResourceExhaustedError(absl::StrCat(
        "brute force limited to m*n <= ", max_cells, ", got ", key.m * key.n));
  }
  FEDCAL_RETURN_IF_ERROR(CheckIndexFor(key, idx));
  const int64_t m = key.m;
  const int64_t n = key.n;
  const int64_t total = m * n;
  std::vector<long double> log_choose_n(n + 1);
  for (int64_t v = 0; v <= n; ++v) log_choose_n[v] = LogChoose(n, v);
  std::vector<long double> log_choose_total(total + 1);
  for (int64_t r = 0; r <= total; ++r) {
    log_choose_total[r] = LogChoose(total, r);
  }
  const long double log_m_factorial =
      std::lgamma(static_cast<long double>(m) + 1);

  // counts[v] = number of agents whose index equals v.
  long double sum = 0.0L;
  std::function<void(int64_t, int64_t, int64_t, int64_t, long double)> visit =
      [&](int64_t v, int64_t remaining, int64_t highs, int64_t index_sum,
          long double log_weight) {
        if (v == n) {
          const int64_t c = remaining;
          const int64_t h = highs + (v >= idx.l ? c : 0);
          if (h < idx.k) return;
          const long double lw = log_weight + c * log_choose_n[v] -
                                 std::lgamma(static_cast<long double>(c) + 1);
          sum += std::exp(log_m_factorial + lw -
                          log_choose_total[index_sum + c * v]);
          return;
        }
        for (int64_t c = 0; c <= remaining; ++c) {
          visit(v + 1, remaining - c, highs + (v >= idx.l ? c : 0),
                index_sum + c * v,
                log_weight + c * log_choose_n[v] -
                    std::lgamma(static_cast<long double>(c) + 1));
        }
      };
  visit(0, m, 0, 0, 0.0L);
  return FinishCoverage(static_cast<double>(sum), total);
}

absl::StatusOr<double> MlkFast(const TableKey& key, const QQIndex& idx) {
  FEDCAL_RETURN_IF_ERROR(ValidateKey(key));
  FEDCAL_RETURN_IF_ERROR(CheckIndexFor(key, idx));
  internal::ColumnEvaluator column(key, idx.l);
  double tail = 0.0;
  for (int64_t j = key.m; j >= idx.k; --j) {
    FEDCAL_ASSIGN_OR_RETURN(double term, column.NextTerm());
    tail += term;
  }
  return FinishCoverage(tail, key.m * key.n);
}

absl::StatusOr<double> MnkGamma(int64_t m, int64_t n, int64_t k) {
  if (m < 1 || n < 1 || k < 1 || k > m) {
    return absl::InvalidArgumentError(absl::StrCat(
        "need m, n >= 1 and 1 <= k <= m, got m=", m, " n=", n, " k=", k));
  }
  const long double inv_n = 1.0L / static_cast<long double>(n);
  const long double lk = static_cast<long double>(k);
  const long double lm = static_cast<long double>(m);
  const long double log_value = std::lgamma(lk + inv_n) - std::lgamma(lk) +
                                std::lgamma(lm + 1.0L) -
                                std::lgamma(lm + inv_n + 1.0L);
  return static_cast<double>(std::exp(log_value));
}

absl::StatusOr<LkSelection> FindLkStar(const TableKey& key, double alpha) {
  FEDCAL_ASSIGN_OR_RETURN(CoverageTable table, CoverageTable::Create(key));
  return table.FindLkStar(alpha);
}

absl::StatusOr<std::vector<double>> UnbalancedCoverages(
    std::span<const int64_t> sizes, std::span<const int64_t> local_ranks) {
  if (sizes.empty()) {
    return absl::InvalidArgumentError("need at least one agent");
  }
  if (sizes.size() != local_ranks.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("got ", sizes.size(), " sizes but ", local_ranks.size(),
                     " local ranks"));
  }
  int64_t total = 0;
  int64_t rank_sum = 0;
  for (size_t a = 0; a < sizes.size(); ++a) {
    if (sizes[a] < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("agent ", a, " has size ", sizes[a]));
    }
    if (local_ranks[a] < 1 || local_ranks[a] > sizes[a]) {
      return absl::InvalidArgumentError(
          absl::StrCat("agent ", a, ": local rank ", local_ranks[a],
                       " outside [1, ", sizes[a], "]"));
    }
    total += sizes[a];
    rank_sum += local_ranks[a];
    if (total > kDefaultMaxCells) {
      return absl::ResourceExhaustedError(
          absl::StrCat("total size exceeds the cap of ", kDefaultMaxCells));
    }
  }
  const int64_t m = static_cast<int64_t>(sizes.size());
  // Common Binomial parameter; reduces to l / (n + 1) for equal sizes.
  const double t =
      static_cast<double>(rank_sum) / static_cast<double>(total + m);

  // state[j] is the log generating polynomial in z of sum_T restricted to
  // exactly j agents above their rank, already multiplied by the rectangle
  // masses of the agents processed so far.
  std::vector<LogPolynomial> state(1, LogPolynomial::One());
  for (int64_t a = 0; a < m; ++a) {
    double log_high = 0.0;
    double log_low = 0.0;
    const LogPolynomial high = internal::TruncatedBinomial(
        sizes[a], local_ranks[a], sizes[a], t, &log_high);
    const LogPolynomial low = internal::TruncatedBinomial(
        sizes[a], 0, local_ranks[a] - 1, t, &log_low);
    std::vector<LogPolynomial> next(state.size() + 1);
    for (size_t j = 0; j < next.size(); ++j) {
      LogPolynomial acc;
      if (j >= 1) {
        acc = internal::LogScale(internal::LogMultiply(state[j - 1], high),
                                 log_high);
      }
      if (j < state.size()) {
        acc = internal::LogAdd(
            acc,
            internal::LogScale(internal::LogMultiply(state[j], low), log_low));
      }
      next[j] = std::move(acc);
    }
    state = std::move(next);
  }
  const std::vector<double> log_binom_row = LogBinomialRow(total, t);
  std::vector<double> coverages(m);
  double tail = 0.0;
  for (int64_t j = m; j >= 1; --j) {
    const double log_mass = LogWeightedMass(state[j], log_binom_row);
    if (std::isnan(log_mass) ||
        log_mass == std::numeric_limits<double>::infinity()) {
      return absl::InternalError(
          absl::StrCat("non-finite log weight for j=", j));
    }
    tail += std::exp(log_mass);
    FEDCAL_ASSIGN_OR_RETURN(coverages[j - 1], FinishCoverage(tail, total));
  }
  return coverages;
}

absl::StatusOr<UnbalancedSelection> FindKUnbalanced(
    std::span<const int64_t> sizes, double alpha) {
  FEDCAL_RETURN_IF_ERROR(CheckAlpha(alpha));
  UnbalancedSelection out;
  out.local_ranks.reserve(sizes.size());
  for (int64_t n_j : sizes) {
    if (n_j < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("agent sizes must be >= 1, got ", n_j));
    }
    out.local_ranks.push_back(std::min(ConformalRank(n_j, alpha), n_j));
  }
  FEDCAL_ASSIGN_OR_RETURN(std::vector<double> coverages,
                          UnbalancedCoverages(sizes, out.local_ranks));
  const double target = 1.0 - alpha - kCoverageSlack;
  for (size_t k = 1; k <= coverages.size(); ++k) {
    if (coverages[k - 1] >= target) {
      out.k = static_cast<int64_t>(k);
      out.coverage = coverages[k - 1];
      return out;
    }
  }
  return absl::FailedPreconditionError(absl::StrFormat(
      "infeasible: with local ranks fixed at ceil((1-alpha)(n_j+1)) the "
      "largest reachable coverage is %.6f < %.6f",
      coverages.back(), 1.0 - alpha));
}

absl::StatusOr<double> ConditionalBound(const TableKey& key, double alpha,
                                        double delta) {
  FEDCAL_RETURN_IF_ERROR(ValidateKey(key));
  FEDCAL_RETURN_IF_ERROR(CheckAlpha(alpha));
  if (!(delta > 0.0 && delta <= 0.5)) {
    return absl::InvalidArgumentError(
        absl::StrCat("delta must lie in (0, 0.5], got ", delta));
  }
  const double cells = static_cast<double>(key.m) * static_cast<double>(key.n);
  return alpha + std::sqrt(std::log(1.0 / delta) / (2.0 * cells));
}

bool MeetsConditionalRankCondition(const TableKey& key, const QQIndex& idx,
                                   double alpha) {
  return static_cast<double>(idx.l) * static_cast<double>(idx.k) >=
         (1.0 - alpha) * static_cast<double>(key.m) *
             static_cast<double>(key.n);
}

// Progress of partially evaluated columns. Column l has tail sums for all
// k >= lowest_k; only the most recently extended column keeps its evaluator.
struct CoverageTable::ColumnCache {
  struct Progress {
    int64_t lowest_k = 0;
    double tail = 0.0;
  };
  std::map<int64_t, Progress> progress;
  std::unique_ptr<internal::ColumnEvaluator> active;
};

CoverageTable::CoverageTable(const TableKey& key)
    : key_(key),
      columns_(std::make_unique<ColumnCache>()),
      mu_(std::make_unique<std::mutex>()) {}

CoverageTable::CoverageTable(CoverageTable&&) noexcept = default;
CoverageTable& CoverageTable::operator=(CoverageTable&&) noexcept = default;
CoverageTable::~CoverageTable() = default;

absl::StatusOr<CoverageTable> CoverageTable::Create(const TableKey& key,
                                                    int64_t max_cells) {
  FEDCAL_RETURN_IF_ERROR(ValidateKey(key, max_cells));
  return CoverageTable(key);
}

absl::Status CoverageTable::CheckIndex(const QQIndex& idx) const {
  return CheckIndexFor(key_, idx);
}

absl::StatusOr<double> CoverageTable::Entry(const QQIndex& idx) {
  std::lock_guard<std::mutex> lock(*mu_);
  return EntryLocked(idx);
}

absl::StatusOr<double> CoverageTable::EntryLocked(const QQIndex& idx) {
  FEDCAL_RETURN_IF_ERROR(CheckIndex(idx));
  if (auto it = entries_.find({idx.l, idx.k}); it != entries_.end()) {
    return it->second;
  }
  auto& cache = *columns_;
  auto [it, inserted] =
      cache.progress.try_emplace(idx.l, ColumnCache::Progress{key_.m + 1, 0.0});
  auto& progress = it->second;
  const bool resumable = cache.active != nullptr &&
                         cache.active->l() == idx.l &&
                         cache.active->next_j() == progress.lowest_k - 1;
  if (!resumable) {
    cache.active = std::make_unique<internal::ColumnEvaluator>(key_, idx.l);
    progress = ColumnCache::Progress{key_.m + 1, 0.0};
  }
  while (progress.lowest_k > idx.k) {
    FEDCAL_ASSIGN_OR_RETURN(double term, cache.active->NextTerm());
    progress.tail += term;
    --progress.lowest_k;
    FEDCAL_ASSIGN_OR_RETURN(double coverage,
                            FinishCoverage(progress.tail, key_.m * key_.n));
    entries_.try_emplace({idx.l, progress.lowest_k}, coverage);
  }
  return entries_.at({idx.l, idx.k});
}

absl::StatusOr<LkSelection> CoverageTable::FindLkStar(double alpha) {
  std::lock_guard<std::mutex> lock(*mu_);
  return FindLkStarLocked(alpha);
}

absl::StatusOr<LkSelection> CoverageTable::FindLkStarLocked(double alpha) {
  FEDCAL_RETURN_IF_ERROR(CheckAlpha(alpha));
  const double target = 1.0 - alpha - kCoverageSlack;
  std::optional<LkSelection> best;
  int64_t k_floor = 1;
  for (int64_t l = key_.n; l >= 1; --l) {
    FEDCAL_ASSIGN_OR_RETURN(double top, EntryLocked({l, key_.m}));
    // M is nondecreasing in l: once the largest k fails, smaller l fail too.
    if (top < target) break;
    int64_t k = key_.m;
    double coverage = top;
    // The smallest feasible k can only grow as l decreases.
    while (k - 1 >= k_floor) {
      FEDCAL_ASSIGN_OR_RETURN(double below, EntryLocked({l, k - 1}));
      if (below < target) break;
      --k;
      coverage = below;
    }
    k_floor = k;
    if (!best.has_value() || coverage <= best->coverage + kCoverageSlack) {
      best = LkSelection{{l, k}, coverage};
    }
  }
  if (!best.has_value()) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "infeasible: no (l, k) reaches coverage %.6g with m=%d, n=%d; the "
        "largest coverage is mn/(mn+1) so alpha must be >= 1/(mn+1)",
        1.0 - alpha, key_.m, key_.n));
  }
  return *best;
}

absl::StatusOr<LkSelection> CoverageTable::Select(double alpha) {
  std::lock_guard<std::mutex> lock(*mu_);
  FEDCAL_ASSIGN_OR_RETURN(LkSelection sel, FindLkStarLocked(alpha));
  selected_ = Selected{alpha, sel};
  return sel;
}

absl::StatusOr<LkSelection> CoverageTable::FindK(int64_t l, double alpha) {
  std::lock_guard<std::mutex> lock(*mu_);
  FEDCAL_RETURN_IF_ERROR(CheckAlpha(alpha));
  const double target = 1.0 - alpha - kCoverageSlack;
  FEDCAL_ASSIGN_OR_RETURN(double coverage, EntryLocked({l, key_.m}));
  if (coverage < target) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "infeasible: M(l=%d, k=m) = %.6f < %.6f", l, coverage, 1.0 - alpha));
  }
  int64_t k = key_.m;
  while (k > 1) {
    FEDCAL_ASSIGN_OR_RETURN(double below, EntryLocked({l, k - 1}));
    if (below < target) break;
    --k;
    coverage = below;
  }
  return LkSelection{{l, k}, coverage};
}

std::optional<CoverageTable::Selected> CoverageTable::selected() const {
  std::lock_guard<std::mutex> lock(*mu_);
  return selected_;
}

std::vector<TableEntry> CoverageTable::Entries() const {
  std::lock_guard<std::mutex> lock(*mu_);
  std::vector<TableEntry> out;
  out.reserve(entries_.size());
  for (const auto& [key, value] : entries_) {
    out.push_back({{key.first, key.second}, value});
  }
  return out;
}

size_t CoverageTable::size() const {
  std::lock_guard<std::mutex> lock(*mu_);
  return entries_.size();
}

absl::Status CoverageTable::Insert(const QQIndex& idx, double coverage) {
  std::lock_guard<std::mutex> lock(*mu_);
  FEDCAL_RETURN_IF_ERROR(CheckIndex(idx));
  if (!(coverage >= 0.0 && coverage <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("coverage ", coverage, " outside [0, 1]"));
  }
  auto [it, inserted] = entries_.try_emplace({idx.l, idx.k}, coverage);
  if (!inserted && std::abs(it->second - coverage) > kRangeSlack) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "conflicting value for (l=%d, k=%d): have %.17g, got %.17g", idx.l,
        idx.k, it->second, coverage));
  }
  return absl::OkStatus();
}

absl::Status CoverageTable::CheckInvariants() const {
  std::lock_guard<std::mutex> lock(*mu_);
  for (const auto& [key, value] : entries_) {
    if (!(value >= 0.0 && value <= 1.0)) {
      return absl::FailedPreconditionError(
          absl::StrFormat("entry (l=%d, k=%d) = %.17g outside [0, 1]",
                          key.first, key.second, value));
    }
    // Compare with the stored neighbours one step up in l and in k.
    for (const auto& next : {std::pair{key.first + 1, key.second},
                             std::pair{key.first, key.second + 1}}) {
      auto it = entries_.find(next);
      if (it != entries_.end() && it->second < value - kRangeSlack) {
        return absl::FailedPreconditionError(absl::StrFormat(
            "monotonicity violated: M(%d,%d) = %.17g > M(%d,%d) = %.17g",
            key.first, key.second, value, next.first, next.second, it->second));
      }
    }
  }
  if (selected_.has_value()) {
    const auto& sel = selected_->selection;
    if (sel.coverage < 1.0 - selected_->alpha - kCoverageSlack) {
      return absl::FailedPreconditionError("selected entry misses 1 - alpha");
    }
    for (const auto& [key, value] : entries_) {
      if (value >= 1.0 - selected_->alpha - kCoverageSlack &&
          value < sel.coverage - kCoverageSlack) {
        return absl::FailedPreconditionError(absl::StrFormat(
            "selected entry is not minimal: M(%d,%d) = %.17g is smaller",
            key.first, key.second, value));
      }
    }
  }
  return absl::OkStatus();
}

}  // namespace fedcal
