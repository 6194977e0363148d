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
// Distribution-free coverage of the quantile-of-quantiles prediction set.
//
// For m agents holding n i.i.d. continuous scores each, the set
// {s <= Q(l, k)} built from the k-th smallest of the agents' l-th smallest
// scores covers a fresh score with probability exactly
//
//   M(l, k) = 1 - 1/(mn+1) * sum_{j=k}^{m} C(m,j)
//               * sum_{i_1..i_j >= l} sum_{i_{j+1}..i_m < l}
//                   prod_t C(n, i_t) / C(mn, i_1 + ... + i_m).
//
// The inner sums are rectangular probabilities of a multivariate
// hypergeometric law. The fast path evaluates them as
//
//   p_r(a, b) = P(sum T_i = r) * prod_i P(a_i <= W_i <= b_i) / P(sum W_i = r)
//
// with W_i ~ Binomial(n, t) and T_i the W_i truncated to [a_i, b_i], where
// t = l / (n + 1). Everything is carried in log space.

#ifndef FEDCAL_COVERAGE_TABLE_H_
#define FEDCAL_COVERAGE_TABLE_H_

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace fedcal {

struct TableKey {
  int64_t m = 1;  // agents
  int64_t n = 1;  // scores per agent
  friend bool operator==(const TableKey&, const TableKey&) = default;
};

struct QQIndex {
  int64_t l = 1;  // local rank, 1 <= l <= n
  int64_t k = 1;  // server rank, 1 <= k <= m
  friend auto operator<=>(const QQIndex&, const QQIndex&) = default;
};

struct LkSelection {
  QQIndex index;
  double coverage = 0.0;
};

struct TableEntry {
  QQIndex index;
  double coverage = 0.0;
};

inline constexpr int64_t kDefaultMaxCells = 1'000'000;
inline constexpr int64_t kDefaultBruteForceCells = 64;

// Absolute slack used when testing M >= 1 - alpha and when deciding ties.
inline constexpr double kCoverageSlack = 1e-12;

// m, n >= 1 and m * n <= max_cells.
absl::Status ValidateKey(const TableKey& key,
                         int64_t max_cells = kDefaultMaxCells);

// Direct evaluation of the nested sum over (i_1, ..., i_m). Index vectors are
// visited once per multiset and weighted by their number of orderings.
// Refuses keys with m * n > max_cells.
absl::StatusOr<double> MlkBruteForce(
    const TableKey& key, const QQIndex& idx,
    int64_t max_cells = kDefaultBruteForceCells);

// Rectangular-probability evaluation of M(l, k).
absl::StatusOr<double> MlkFast(const TableKey& key, const QQIndex& idx);

// Closed form for l = n (each agent reports its maximum):
// Gamma(k + 1/n) / Gamma(k) * Gamma(m + 1) / Gamma(m + 1/n + 1).
absl::StatusOr<double> MnkGamma(int64_t m, int64_t n, int64_t k);

// argmin { M(l,k) : M(l,k) >= 1 - alpha } over the full grid, ties broken
// towards the smallest l, then the smallest k.
absl::StatusOr<LkSelection> FindLkStar(const TableKey& key, double alpha);

// Coverage when agent j reports its local_ranks[j]-th smallest of sizes[j]
// scores. Element k-1 of the result is the coverage for server rank k.
absl::StatusOr<std::vector<double>> UnbalancedCoverages(
    std::span<const int64_t> sizes, std::span<const int64_t> local_ranks);

struct UnbalancedSelection {
  std::vector<int64_t> local_ranks;
  int64_t k = 1;
  double coverage = 0.0;
};

// Fixes l_j = min(ceil((1 - alpha)(n_j + 1)), n_j) and returns the smallest
// server rank whose coverage reaches 1 - alpha.
absl::StatusOr<UnbalancedSelection> FindKUnbalanced(
    std::span<const int64_t> sizes, double alpha);

// alpha + sqrt(log(1/delta) / (2 m n)): with probability >= 1 - delta over the
// calibration data, the conditional miscoverage is at most this value,
// provided l * k >= (1 - alpha) m n. Requires 0 < delta <= 0.5.
absl::StatusOr<double> ConditionalBound(const TableKey& key, double alpha,
                                        double delta);

// The rank condition l * k >= (1 - alpha) * m * n of the conditional bound.
bool MeetsConditionalRankCondition(const TableKey& key, const QQIndex& idx,
                                   double alpha);

namespace internal {

// Evaluates T_j = C(m,j) * sum_r p_r for one column l, where
// M(l, k) = 1 - sum_{j >= k} T_j / (mn + 1). Terms must be requested for
// strictly decreasing j starting at m.
class ColumnEvaluator;

}  // namespace internal

// Lazily materialized map (l, k) -> M(l, k) for a fixed (m, n). Entries do
// not depend on alpha or on the score distribution, so one table serves any
// number of calibrations. All members are safe to call concurrently.
class CoverageTable {
 public:
  struct Selected {
    double alpha = 0.0;
    LkSelection selection;
  };

  static absl::StatusOr<CoverageTable> Create(
      const TableKey& key, int64_t max_cells = kDefaultMaxCells);

  CoverageTable(CoverageTable&&) noexcept;
  CoverageTable& operator=(CoverageTable&&) noexcept;
  ~CoverageTable();

  const TableKey& key() const { return key_; }

  // M(l, k), computed on first use.
  absl::StatusOr<double> Entry(const QQIndex& idx);

  // The (l*, k*) search. Walks the feasibility frontier from l = n downwards
  // and only materializes entries on or next to it.
  absl::StatusOr<LkSelection> FindLkStar(double alpha);

  // FindLkStar that also records the result as the table's selection.
  absl::StatusOr<LkSelection> Select(double alpha);

  // Smallest k with M(l, k) >= 1 - alpha for a fixed l.
  absl::StatusOr<LkSelection> FindK(int64_t l, double alpha);

  std::optional<Selected> selected() const;

  // Materialized entries ordered by (l, k).
  std::vector<TableEntry> Entries() const;
  size_t size() const;

  // Adds a precomputed entry. Re-inserting an identical value is a no-op; a
  // conflicting value is rejected.
  absl::Status Insert(const QQIndex& idx, double coverage);

  // Range and monotonicity checks over the materialized entries.
  absl::Status CheckInvariants() const;

 private:
  struct ColumnCache;

  explicit CoverageTable(const TableKey& key);

  absl::Status CheckIndex(const QQIndex& idx) const;
  absl::StatusOr<double> EntryLocked(const QQIndex& idx);
  absl::StatusOr<LkSelection> FindLkStarLocked(double alpha);

  TableKey key_;
  std::map<std::pair<int64_t, int64_t>, double> entries_;
  std::unique_ptr<ColumnCache> columns_;
  std::optional<Selected> selected_;
  std::unique_ptr<std::mutex> mu_;
};

}  // namespace fedcal

#endif  // FEDCAL_COVERAGE_TABLE_H_
