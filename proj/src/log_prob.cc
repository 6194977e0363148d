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
#include "fedcal/log_prob.h"

#include <algorithm>
#include <cmath>

namespace fedcal::internal {

double LogChoose(int64_t n, int64_t k) {
  if (k < 0 || k > n || n < 0) return kLogZero;
  if (k == 0 || k == n) return 0.0;
  const long double ln = static_cast<long double>(n);
  const long double lk = static_cast<long double>(k);
  return static_cast<double>(std::lgamma(ln + 1.0L) - std::lgamma(lk + 1.0L) -
                             std::lgamma(ln - lk + 1.0L));
}

double LogBinomialPmf(int64_t n, int64_t k, long double log_t,
                      long double log1m_t) {
  if (k < 0 || k > n) return kLogZero;
  long double v = LogChoose(n, k);
  if (k > 0) v += static_cast<long double>(k) * log_t;
  if (n - k > 0) v += static_cast<long double>(n - k) * log1m_t;
  return static_cast<double>(v);
}

double LogSumExp(std::span<const double> values) {
  double mx = kLogZero;
  for (double v : values) mx = std::max(mx, v);
  if (mx == kLogZero) return kLogZero;
  if (std::isinf(mx)) return mx;
  double sum = 0.0;
  for (double v : values) {
    if (v >= mx - kLogPruneWindow) sum += std::exp(v - mx);
  }
  return mx + std::log(sum);
}

LogPolynomial LogPolynomial::One() {
  LogPolynomial p;
  p.offset = 0;
  p.log_coef = {0.0};
  return p;
}

LogPolynomial LogMultiply(const LogPolynomial& a, const LogPolynomial& b) {
  LogPolynomial out;
  if (a.log_coef.empty() || b.log_coef.empty()) return out;
  const int64_t na = static_cast<int64_t>(a.log_coef.size());
  const int64_t nb = static_cast<int64_t>(b.log_coef.size());
  out.offset = a.offset + b.offset;
  out.log_coef.assign(na + nb - 1, kLogZero);
  const double* av = a.log_coef.data();
  const double* bv = b.log_coef.data();
  for (int64_t r = 0; r < na + nb - 1; ++r) {
    const int64_t i_lo = std::max<int64_t>(0, r - (nb - 1));
    const int64_t i_hi = std::min<int64_t>(na - 1, r);
    double mx = kLogZero;
    for (int64_t i = i_lo; i <= i_hi; ++i) {
      mx = std::max(mx, av[i] + bv[r - i]);
    }
    if (mx == kLogZero) continue;
    const double floor = mx - kLogPruneWindow;
    double sum = 0.0;
    for (int64_t i = i_lo; i <= i_hi; ++i) {
      const double term = av[i] + bv[r - i];
      if (term >= floor) sum += std::exp(term - mx);
    }
    out.log_coef[r] = mx + std::log(sum);
  }
  return out;
}

LogPolynomial LogAdd(const LogPolynomial& a, const LogPolynomial& b) {
  if (a.log_coef.empty()) return b;
  if (b.log_coef.empty()) return a;
  LogPolynomial out;
  out.offset = std::min(a.offset, b.offset);
  const int64_t hi = std::max(a.highest_degree(), b.highest_degree());
  out.log_coef.resize(hi - out.offset + 1);
  for (int64_t d = out.offset; d <= hi; ++d) {
    const double x = a.at(d);
    const double y = b.at(d);
    const double mx = std::max(x, y);
    double v = mx;
    if (mx != kLogZero) {
      v = mx + std::log1p(std::exp(std::min(x, y) - mx));
    }
    out.log_coef[d - out.offset] = v;
  }
  return out;
}

LogPolynomial LogScale(LogPolynomial p, double shift) {
  for (double& v : p.log_coef) v += shift;
  return p;
}

LogPolynomial TruncatedBinomial(int64_t n, int64_t lo, int64_t hi, double t,
                                double* log_mass) {
  LogPolynomial p;
  lo = std::max<int64_t>(lo, 0);
  hi = std::min<int64_t>(hi, n);
  if (lo > hi) {
    if (log_mass != nullptr) *log_mass = kLogZero;
    return p;
  }
  const long double log_t = std::log(static_cast<long double>(t));
  const long double log1m_t = std::log1p(-static_cast<long double>(t));
  p.offset = lo;
  p.log_coef.resize(hi - lo + 1);
  for (int64_t i = lo; i <= hi; ++i) {
    p.log_coef[i - lo] = LogBinomialPmf(n, i, log_t, log1m_t);
  }
  const double mass = LogSumExp(p.log_coef);
  for (double& v : p.log_coef) v -= mass;
  if (log_mass != nullptr) *log_mass = mass;
  return p;
}

}  // namespace fedcal::internal
