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
// Log-space probability helpers: binomial coefficients, log-sum-exp and
// exact polynomial products of sequences stored as logarithms.

#ifndef FEDCAL_LOG_PROB_H_
#define FEDCAL_LOG_PROB_H_

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace fedcal::internal {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// Terms further than this many nats below the largest term of a sum are
// skipped. e^-60 is ~1e-26, far below double resolution even after summing
// millions of them.
inline constexpr double kLogPruneWindow = 60.0;

// log C(n, k); kLogZero outside 0 <= k <= n. Evaluated in long double.
double LogChoose(int64_t n, int64_t k);

// log of the Binomial(n, t) mass at k, with log t and log(1 - t) supplied.
double LogBinomialPmf(int64_t n, int64_t k, long double log_t,
                      long double log1m_t);

// log(sum(exp(values))), kLogZero for an empty or all-zero input.
double LogSumExp(std::span<const double> values);

// A finitely supported nonnegative sequence c_i, i = offset .. offset+size-1,
// stored as log c_i. Think of it as the polynomial sum_i c_i z^i.
struct LogPolynomial {
  int64_t offset = 0;
  std::vector<double> log_coef;

  int64_t lowest_degree() const { return offset; }
  int64_t highest_degree() const {
    return offset + static_cast<int64_t>(log_coef.size()) - 1;
  }
  double at(int64_t degree) const {
    if (degree < offset || degree > highest_degree()) return kLogZero;
    return log_coef[degree - offset];
  }

  // The constant polynomial 1.
  static LogPolynomial One();
};

// Exact product of two polynomials with nonnegative coefficients. Each output
// coefficient keeps full relative precision regardless of its magnitude.
LogPolynomial LogMultiply(const LogPolynomial& a, const LogPolynomial& b);

// Coefficient-wise log(exp(a) + exp(b)).
LogPolynomial LogAdd(const LogPolynomial& a, const LogPolynomial& b);

// Adds `shift` to every log coefficient (multiplication by exp(shift)).
LogPolynomial LogScale(LogPolynomial p, double shift);

// log of the Binomial(n, t) mass restricted to [lo, hi] and renormalized,
// i.e. the truncated binomial distribution. `log_mass` receives
// log P(lo <= W <= hi).
LogPolynomial TruncatedBinomial(int64_t n, int64_t lo, int64_t hi, double t,
                                double* log_mass);

}  // namespace fedcal::internal

#endif  // FEDCAL_LOG_PROB_H_
